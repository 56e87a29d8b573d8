//! Shared rig: simulator plus server, session presets, a raw wire client and a
//! relay that can go silent.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use gridwire_core::grid::{spawn_simulator, GridCase, Pacing, RunnerConfig, SimHandle, Simulator};
use gridwire_core::points::PointMap;
use gridwire_core::proto::link::func;
use gridwire_core::proto::{
    decode_app_fragment, fragment_frames, AppFragment, FunctionCode, LinkControl, LinkReader, ObjectBlock,
    Reassembler, TransportSegment, Variation,
};
use gridwire_master::{SessionConfig, SessionHandle};
use gridwire_outstation::{serve, ServerConfig, ServerHandle};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinSet;
use tokio::time::timeout;

pub fn workspace_file(rel: &str) -> Result<String, String> {
    let path = format!("{}/../../{rel}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))
}

pub fn load_case(rel: &str) -> Result<Arc<GridCase>, String> {
    let case = GridCase::from_toml(&workspace_file(rel)?).map_err(|e| format!("{rel}: {e}"))?;
    Ok(Arc::new(case))
}

pub fn load_map(rel: &str) -> Result<PointMap, String> {
    PointMap::from_toml(&workspace_file(rel)?).map_err(|e| format!("{rel}: {e}"))
}

/// Manually paced simulator (100 ms ticks) behind one outstation server.
pub struct Bench {
    pub sim: SimHandle,
    pub server: ServerHandle,
}

impl Bench {
    pub async fn start(case: Arc<GridCase>, map: &PointMap) -> Result<Self, String> {
        Self::start_on(case, map, "127.0.0.1:0".parse().expect("literal address")).await
    }

    pub async fn start_on(case: Arc<GridCase>, map: &PointMap, bind: SocketAddr) -> Result<Self, String> {
        let (sim, _task) = spawn_simulator(
            Simulator::new(case),
            RunnerConfig {
                tick: Duration::from_millis(100),
                pacing: Pacing::Manual,
            },
        );
        let server = serve(
            ServerConfig {
                bind,
                ..ServerConfig::default()
            },
            map,
            sim.clone(),
        )
        .await
        .map_err(|e| format!("server on {bind}: {e}"))?;
        Ok(Self { sim, server })
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.local_addr()
    }

    pub async fn stop(self) {
        self.server.shutdown().await;
        self.sim.shutdown().await;
    }
}

/// Scheduled polls are slow so scenarios drive polls themselves unless they
/// shorten the periods.
pub fn session(name: &str, server: SocketAddr, outstation: u16) -> SessionConfig {
    SessionConfig {
        integrity_poll_period: 60.0,
        class123_poll_period: 30.0,
        poll_timeout: 0.5,
        reconnect_delay: 0.05,
        ..SessionConfig::new(name, server, outstation)
    }
}

pub async fn wait_for(what: &str, limit: Duration, mut cond: impl FnMut() -> bool) -> Result<(), String> {
    let deadline = tokio::time::Instant::now() + limit;
    while tokio::time::Instant::now() < deadline {
        if cond() {
            return Ok(());
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    Err(format!("timed out after {limit:?} waiting for {what}"))
}

pub async fn wait_online(s: &SessionHandle) -> Result<(), String> {
    wait_for(&format!("session {} online", s.name()), Duration::from_secs(5), || {
        let h = s.health();
        !h.offline && h.success > 0
    })
    .await
}

pub fn integrity() -> Vec<ObjectBlock> {
    use Variation::*;
    [Class1, Class2, Class3, Class0].into_iter().map(ObjectBlock::all).collect()
}

pub fn events_only() -> Vec<ObjectBlock> {
    use Variation::*;
    [Class1, Class2, Class3].into_iter().map(ObjectBlock::all).collect()
}

/// Bare master side of the wire, independent of the session code.
pub struct RawClient {
    stream: TcpStream,
    reader: LinkReader,
    reassembler: Reassembler,
    address: u16,
    tx_seq: u8,
    app_seq: u8,
}

impl RawClient {
    pub async fn connect(addr: SocketAddr, address: u16) -> Result<Self, String> {
        Ok(Self {
            stream: TcpStream::connect(addr).await.map_err(|e| format!("connect {addr}: {e}"))?,
            reader: LinkReader::new(),
            reassembler: Reassembler::new(65536),
            address,
            tx_seq: 0,
            app_seq: 0,
        })
    }

    async fn send(&mut self, dest: u16, frag: &AppFragment) -> Result<(), String> {
        let frames = fragment_frames(frag, LinkControl::master_data(), dest, self.address, self.tx_seq)
            .map_err(|e| e.to_string())?;
        self.tx_seq = (self.tx_seq + frames.len() as u8) & 0x3F;
        self.stream.write_all(&frames.concat()).await.map_err(|e| e.to_string())
    }

    /// Next application fragment and the link source that carried it.
    async fn recv(&mut self) -> Result<(u16, AppFragment), String> {
        let mut buf = [0u8; 4096];
        loop {
            while let Some(frame) = self.reader.next_frame() {
                if !frame.control.prm || frame.control.function != func::UNCONFIRMED_USER_DATA {
                    continue;
                }
                let seg = TransportSegment::decode(&frame.user_data).map_err(|e| e.to_string())?;
                if let Some(bytes) = self.reassembler.push(&seg).map_err(|e| e.to_string())? {
                    return Ok((frame.source, decode_app_fragment(&bytes).map_err(|e| e.to_string())?));
                }
            }
            let n = timeout(Duration::from_secs(3), self.stream.read(&mut buf))
                .await
                .map_err(|_| "no response within 3 s".to_string())?
                .map_err(|e| e.to_string())?;
            if n == 0 {
                return Err("connection closed".into());
            }
            self.reader.push(&buf[..n]);
        }
    }

    /// Sends one request, confirms every fragment that asks for it and
    /// returns all response fragments. Fails on a response from another address.
    pub async fn request(
        &mut self,
        dest: u16,
        function: FunctionCode,
        objects: Vec<ObjectBlock>,
    ) -> Result<Vec<AppFragment>, String> {
        let seq = self.app_seq;
        self.app_seq = (self.app_seq + 1) & 0x0F;
        self.send(dest, &AppFragment::request(function, seq, objects)).await?;
        let mut out = Vec::new();
        loop {
            let (src, frag) = self.recv().await?;
            if src != dest {
                return Err(format!("request to {dest} answered by {src}"));
            }
            if frag.control.con {
                self.send(dest, &AppFragment::confirm(frag.control.seq, false)).await?;
            }
            let fin = frag.control.fin;
            out.push(frag);
            if fin {
                return Ok(out);
            }
        }
    }
}

/// TCP relay that can swallow traffic in both directions, leaving the
/// connection open but silent.
pub struct Proxy {
    pub addr: SocketAddr,
    frozen: Arc<AtomicBool>,
    task: tokio::task::JoinHandle<()>,
}

impl Proxy {
    pub async fn start(upstream: SocketAddr) -> Result<Self, String> {
        let listener = TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let frozen = Arc::new(AtomicBool::new(false));
        let f = frozen.clone();
        let task = tokio::spawn(async move {
            let mut pumps = JoinSet::new();
            loop {
                let Ok((down, _)) = listener.accept().await else { return };
                let Ok(up) = TcpStream::connect(upstream).await else { continue };
                let (dr, dw) = down.into_split();
                let (ur, uw) = up.into_split();
                pumps.spawn(pump(dr, uw, f.clone()));
                pumps.spawn(pump(ur, dw, f.clone()));
            }
        });
        Ok(Self { addr, frozen, task })
    }

    pub fn freeze(&self, on: bool) {
        self.frozen.store(on, Ordering::SeqCst);
    }
}

impl Drop for Proxy {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn pump(mut from: impl AsyncReadExt + Unpin, mut to: impl AsyncWriteExt + Unpin, frozen: Arc<AtomicBool>) {
    let mut buf = [0u8; 4096];
    loop {
        match from.read(&mut buf).await {
            Ok(0) | Err(_) => return,
            Ok(n) => {
                if frozen.load(Ordering::SeqCst) {
                    continue;
                }
                if to.write_all(&buf[..n]).await.is_err() {
                    return;
                }
            }
        }
    }
}
