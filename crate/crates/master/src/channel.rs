//! One TCP connection to an outstation with stop-and-wait request/response.

use std::net::SocketAddr;
use std::time::Duration;

use gridwire_core::proto::link::func;
use gridwire_core::proto::{
    decode_app_fragment, encode_link_frame, fragment_frames, AppFragment, FunctionCode, LinkControl, LinkFrame,
    LinkReader, ObjectBlock, Reassembler, TransportSegment,
};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::{timeout, timeout_at, Instant};
use tracing::debug;

const MAX_RESPONSE: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("no response within the poll timeout")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl WireError {
    /// Whether the connection must be re-established.
    pub fn is_fatal(&self) -> bool {
        matches!(self, WireError::Closed | WireError::Io(_))
    }
}

pub(crate) struct Channel {
    rd: OwnedReadHalf,
    wr: OwnedWriteHalf,
    reader: LinkReader,
    reassembler: Reassembler,
    local: u16,
    remote: u16,
    tx_seq: u8,
    app_seq: u8,
    /// Response fragments received, including stale ones.
    pub received: u64,
    buf: Vec<u8>,
}

impl Channel {
    pub async fn connect(addr: SocketAddr, wait: Duration, local: u16, remote: u16) -> Result<Self, WireError> {
        let stream = match timeout(wait, TcpStream::connect(addr)).await {
            Err(_) => return Err(WireError::Timeout),
            Ok(Err(e)) => return Err(WireError::Io(e.to_string())),
            Ok(Ok(s)) => s,
        };
        let _ = stream.set_nodelay(true);
        let (rd, wr) = stream.into_split();
        Ok(Self {
            rd,
            wr,
            reader: LinkReader::new(),
            reassembler: Reassembler::new(MAX_RESPONSE),
            local,
            remote,
            tx_seq: 0,
            app_seq: 0,
            received: 0,
            buf: vec![0; 4096],
        })
    }

    async fn send(&mut self, frag: &AppFragment) -> Result<(), WireError> {
        let frames = fragment_frames(frag, LinkControl::master_data(), self.remote, self.local, self.tx_seq)
            .map_err(|e| WireError::Malformed(e.to_string()))?;
        self.tx_seq = (self.tx_seq + frames.len() as u8) & 0x3F;
        self.wr
            .write_all(&frames.concat())
            .await
            .map_err(|e| WireError::Io(e.to_string()))
    }

    async fn link_ack(&mut self, to: &LinkFrame) -> Result<(), WireError> {
        let control = LinkControl {
            dir: true,
            prm: false,
            function: func::ACK,
            ..Default::default()
        };
        let bytes = encode_link_frame(&LinkFrame::new(control, to.source, self.local, Vec::new())).expect("empty frame");
        self.wr.write_all(&bytes).await.map_err(|e| WireError::Io(e.to_string()))
    }

    async fn next_frame(&mut self, deadline: Instant) -> Result<LinkFrame, WireError> {
        loop {
            if let Some(f) = self.reader.next_frame() {
                return Ok(f);
            }
            let n = match timeout_at(deadline, self.rd.read(&mut self.buf)).await {
                Err(_) => return Err(WireError::Timeout),
                Ok(Err(e)) => return Err(WireError::Io(e.to_string())),
                Ok(Ok(0)) => return Err(WireError::Closed),
                Ok(Ok(n)) => n,
            };
            self.reader.push(&self.buf[..n]);
        }
    }

    /// Sends one request and collects the complete (possibly multi-fragment) response.
    pub async fn transact(
        &mut self,
        function: FunctionCode,
        objects: Vec<ObjectBlock>,
        wait: Duration,
    ) -> Result<Vec<AppFragment>, WireError> {
        let seq = self.app_seq;
        self.app_seq = (self.app_seq + 1) & 0x0F;
        self.send(&AppFragment::request(function, seq, objects)).await?;
        let deadline = Instant::now() + wait;
        let mut expect = seq;
        let mut out: Vec<AppFragment> = Vec::new();
        loop {
            let frame = self.next_frame(deadline).await?;
            if frame.source != self.remote || frame.destination != self.local || !frame.control.prm {
                continue;
            }
            if frame.control.function == func::CONFIRMED_USER_DATA {
                self.link_ack(&frame).await?;
            }
            let Ok(seg) = TransportSegment::decode(&frame.user_data) else { continue };
            let bytes = match self.reassembler.push(&seg) {
                Ok(Some(b)) => b,
                Ok(None) => continue,
                Err(e) => return Err(WireError::Malformed(e.to_string())),
            };
            let frag = decode_app_fragment(&bytes).map_err(|e| WireError::Malformed(e.to_string()))?;
            match frag.function {
                FunctionCode::UnsolicitedResponse => {
                    if frag.control.con {
                        self.send(&AppFragment::confirm(frag.control.seq, true)).await?;
                    }
                }
                FunctionCode::Response => {
                    self.received += 1;
                    if frag.control.seq != expect || (out.is_empty() && !frag.control.fir) {
                        debug!(seq = frag.control.seq, expect, "ignoring stale response");
                        continue;
                    }
                    if frag.control.con {
                        self.send(&AppFragment::confirm(frag.control.seq, false)).await?;
                    }
                    let fin = frag.control.fin;
                    out.push(frag);
                    if fin {
                        return Ok(out);
                    }
                    expect = (expect + 1) & 0x0F;
                }
                _ => {}
            }
        }
    }
}
