#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use gridwire_core::grid::{spawn_simulator, GridCase, Pacing, RunnerConfig, SimHandle, Simulator};
use gridwire_core::points::PointMap;
use gridwire_core::proto::link::func;
use gridwire_core::proto::{
    decode_app_fragment, encode_link_frame, fragment_frames, AppFragment, FunctionCode, LinkControl, LinkFrame,
    LinkReader, ObjectBlock, Reassembler, TransportSegment,
};
use gridwire_outstation::{serve, ServerConfig, ServerHandle};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::time::timeout;

pub const MASTER: u16 = 1;
pub const WAIT: Duration = Duration::from_secs(3);

pub fn workspace_file(rel: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../");
    std::fs::read_to_string(format!("{path}{rel}")).unwrap()
}

pub fn glenrose() -> (Arc<GridCase>, PointMap) {
    let case = GridCase::from_toml(&workspace_file("cases/glenrose.toml")).unwrap();
    let map = PointMap::from_toml(&workspace_file("maps/glenrose_560.toml")).unwrap();
    (Arc::new(case), map)
}

pub struct Bench {
    pub sim: SimHandle,
    pub server: ServerHandle,
}

impl Bench {
    pub async fn start(case: Arc<GridCase>, map: &PointMap, config: ServerConfig) -> Self {
        let (sim, _task) = spawn_simulator(
            Simulator::new(case),
            RunnerConfig {
                tick: Duration::from_millis(100),
                pacing: Pacing::Manual,
            },
        );
        let config = ServerConfig {
            bind: "127.0.0.1:0".parse().unwrap(),
            ..config
        };
        let server = serve(config, map, sim.clone()).await.unwrap();
        Self { sim, server }
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.local_addr()
    }

    pub async fn client(&self) -> RawClient {
        RawClient::connect(self.addr(), MASTER).await
    }
}

/// Minimal master side of the wire for driving the server directly.
pub struct RawClient {
    pub stream: TcpStream,
    reader: LinkReader,
    reassembler: Reassembler,
    pub master: u16,
    tx_seq: u8,
    pub app_seq: u8,
}

impl RawClient {
    pub async fn connect(addr: SocketAddr, master: u16) -> Self {
        Self {
            stream: TcpStream::connect(addr).await.unwrap(),
            reader: LinkReader::new(),
            reassembler: Reassembler::new(65536),
            master,
            tx_seq: 0,
            app_seq: 0,
        }
    }

    pub async fn send_raw(&mut self, bytes: &[u8]) {
        self.stream.write_all(bytes).await.unwrap();
    }

    pub async fn send(&mut self, dest: u16, frag: &AppFragment) {
        let frames = fragment_frames(frag, LinkControl::master_data(), dest, self.master, self.tx_seq).unwrap();
        self.tx_seq = (self.tx_seq + frames.len() as u8) & 0x3F;
        self.send_raw(&frames.concat()).await;
    }

    pub async fn link_request(&mut self, dest: u16, function: u8) -> LinkFrame {
        let control = LinkControl {
            dir: true,
            prm: true,
            function,
            ..Default::default()
        };
        let bytes = encode_link_frame(&LinkFrame::new(control, dest, self.master, vec![])).unwrap();
        self.send_raw(&bytes).await;
        self.next_frame().await.expect("link reply")
    }

    async fn next_frame(&mut self) -> Option<LinkFrame> {
        let mut buf = [0u8; 4096];
        loop {
            if let Some(f) = self.reader.next_frame() {
                return Some(f);
            }
            let n = timeout(WAIT, self.stream.read(&mut buf)).await.ok()?.ok()?;
            if n == 0 {
                return None;
            }
            self.reader.push(&buf[..n]);
        }
    }

    /// Next complete application fragment with its link source address.
    pub async fn recv(&mut self) -> Option<(u16, AppFragment)> {
        loop {
            let frame = self.next_frame().await?;
            if !frame.control.prm || frame.control.function != func::UNCONFIRMED_USER_DATA {
                continue;
            }
            let seg = TransportSegment::decode(&frame.user_data).unwrap();
            if let Some(bytes) = self.reassembler.push(&seg).unwrap() {
                return Some((frame.source, decode_app_fragment(&bytes).unwrap()));
            }
        }
    }

    /// Waits for `dur` and reports whether anything arrived.
    pub async fn silent_for(&mut self, dur: Duration) -> bool {
        let mut buf = [0u8; 256];
        match timeout(dur, self.stream.read(&mut buf)).await {
            Err(_) => true,
            Ok(Ok(n)) => {
                self.reader.push(&buf[..n]);
                false
            }
            Ok(Err(_)) => false,
        }
    }

    fn next_seq(&mut self) -> u8 {
        let s = self.app_seq;
        self.app_seq = (self.app_seq + 1) & 0x0F;
        s
    }

    /// Sends one request and returns every response fragment, confirming as asked.
    pub async fn request(&mut self, dest: u16, function: FunctionCode, objects: Vec<ObjectBlock>) -> Vec<AppFragment> {
        let seq = self.next_seq();
        self.send(dest, &AppFragment::request(function, seq, objects)).await;
        let mut out = Vec::new();
        loop {
            let (src, frag) = self.recv().await.expect("response");
            assert_eq!(src, dest, "response from the addressed outstation");
            let fin = frag.control.fin;
            if frag.control.con {
                self.send(dest, &AppFragment::confirm(frag.control.seq, false)).await;
            }
            out.push(frag);
            if fin {
                return out;
            }
        }
    }

    /// Like [`request`] but never confirms; returns the first fragment only.
    pub async fn request_no_confirm(&mut self, dest: u16, function: FunctionCode, objects: Vec<ObjectBlock>) -> AppFragment {
        let seq = self.next_seq();
        self.send(dest, &AppFragment::request(function, seq, objects)).await;
        self.recv().await.expect("response").1
    }

    pub async fn request_with_seq(&mut self, dest: u16, function: FunctionCode, seq: u8, objects: Vec<ObjectBlock>) -> AppFragment {
        self.app_seq = (seq + 1) & 0x0F;
        self.send(dest, &AppFragment::request(function, seq, objects)).await;
        self.recv().await.expect("response").1
    }
}

pub fn integrity() -> Vec<ObjectBlock> {
    use gridwire_core::proto::Variation::*;
    [Class1, Class2, Class3, Class0].into_iter().map(ObjectBlock::all).collect()
}

pub fn events_only() -> Vec<ObjectBlock> {
    use gridwire_core::proto::Variation::*;
    [Class1, Class2, Class3].into_iter().map(ObjectBlock::all).collect()
}
