//! Link layer: CRC-blocked frames starting with `0x05 0x64`.

use thiserror::Error;

use super::crc::{crc_dnp, push_with_crc};

/// The two sync octets that open every frame.
pub const START_BYTES: [u8; 2] = [0x05, 0x64];
/// Largest user-data payload a single frame may carry.
pub const MAX_USER_DATA: usize = 250;
/// Largest encoded frame: 10 header octets, 250 payload octets, 16 body CRCs.
pub const MAX_FRAME_LEN: usize = 292;

const HEADER_LEN: usize = 10;
const BLOCK_LEN: usize = 16;

/// Link function codes. Their meaning depends on the PRM bit.
pub mod func {
    pub const RESET_LINK_STATES: u8 = 0x0;
    pub const TEST_LINK_STATES: u8 = 0x2;
    pub const CONFIRMED_USER_DATA: u8 = 0x3;
    pub const UNCONFIRMED_USER_DATA: u8 = 0x4;
    pub const REQUEST_LINK_STATUS: u8 = 0x9;

    pub const ACK: u8 = 0x0;
    pub const NACK: u8 = 0x1;
    pub const LINK_STATUS: u8 = 0xB;
    pub const NOT_SUPPORTED: u8 = 0xF;
}

/// The link control octet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkControl {
    /// Set on frames sent by a master.
    pub dir: bool,
    /// Set on frames sent by the initiating (primary) station.
    pub prm: bool,
    pub fcb: bool,
    pub fcv: bool,
    /// 4-bit function code, see [`func`].
    pub function: u8,
}

impl LinkControl {
    /// Unconfirmed user data from a master.
    pub fn master_data() -> Self {
        Self {
            dir: true,
            prm: true,
            function: func::UNCONFIRMED_USER_DATA,
            ..Default::default()
        }
    }

    /// Unconfirmed user data from an outstation.
    pub fn outstation_data() -> Self {
        Self {
            dir: false,
            prm: true,
            function: func::UNCONFIRMED_USER_DATA,
            ..Default::default()
        }
    }

    pub fn to_byte(self) -> u8 {
        (self.dir as u8) << 7
            | (self.prm as u8) << 6
            | (self.fcb as u8) << 5
            | (self.fcv as u8) << 4
            | (self.function & 0x0F)
    }

    pub fn from_byte(b: u8) -> Self {
        Self {
            dir: b & 0x80 != 0,
            prm: b & 0x40 != 0,
            fcb: b & 0x20 != 0,
            fcv: b & 0x10 != 0,
            function: b & 0x0F,
        }
    }

    pub fn function_name(&self) -> &'static str {
        match (self.prm, self.function) {
            (true, func::RESET_LINK_STATES) => "RESET_LINK_STATES",
            (true, func::TEST_LINK_STATES) => "TEST_LINK_STATES",
            (true, func::CONFIRMED_USER_DATA) => "CONFIRMED_USER_DATA",
            (true, func::UNCONFIRMED_USER_DATA) => "UNCONFIRMED_USER_DATA",
            (true, func::REQUEST_LINK_STATUS) => "REQUEST_LINK_STATUS",
            (false, func::ACK) => "ACK",
            (false, func::NACK) => "NACK",
            (false, func::LINK_STATUS) => "LINK_STATUS",
            (false, func::NOT_SUPPORTED) => "NOT_SUPPORTED",
            _ => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkFrame {
    pub control: LinkControl,
    pub destination: u16,
    pub source: u16,
    pub user_data: Vec<u8>,
}

impl LinkFrame {
    pub fn new(control: LinkControl, destination: u16, source: u16, user_data: Vec<u8>) -> Self {
        Self {
            control,
            destination,
            source,
            user_data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("user data of {0} octets exceeds the 250-octet frame limit")]
    Oversize(usize),
    /// More input is needed. `skipped` leading octets are garbage and may be dropped.
    #[error("incomplete frame ({skipped} garbage octets skipped)")]
    Incomplete { skipped: usize },
    #[error("header CRC mismatch")]
    HeaderCrc { consumed: usize },
    #[error("body CRC mismatch")]
    BodyCrc { consumed: usize },
    #[error("length octet {length} below minimum of 5")]
    BadLength { length: u8, consumed: usize },
}

impl LinkError {
    /// Octets the caller should discard before retrying.
    pub fn consumed(&self) -> usize {
        match *self {
            LinkError::Oversize(_) => 0,
            LinkError::Incomplete { skipped } => skipped,
            LinkError::HeaderCrc { consumed }
            | LinkError::BodyCrc { consumed }
            | LinkError::BadLength { consumed, .. } => consumed,
        }
    }
}

/// A successfully decoded frame with the octets it (and leading garbage) occupied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedFrame {
    pub frame: LinkFrame,
    pub consumed: usize,
    pub skipped: usize,
}

fn body_len(user_len: usize) -> usize {
    user_len + 2 * user_len.div_ceil(BLOCK_LEN)
}

pub fn encode_link_frame(frame: &LinkFrame) -> Result<Vec<u8>, LinkError> {
    let n = frame.user_data.len();
    if n > MAX_USER_DATA {
        return Err(LinkError::Oversize(n));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body_len(n));
    let mut header = [0u8; 8];
    header[..2].copy_from_slice(&START_BYTES);
    header[2] = (5 + n) as u8;
    header[3] = frame.control.to_byte();
    header[4..6].copy_from_slice(&frame.destination.to_le_bytes());
    header[6..8].copy_from_slice(&frame.source.to_le_bytes());
    push_with_crc(&mut out, &header);
    for block in frame.user_data.chunks(BLOCK_LEN) {
        push_with_crc(&mut out, block);
    }
    Ok(out)
}

fn find_sync(buf: &[u8]) -> Option<usize> {
    buf.windows(2).position(|w| w == START_BYTES)
}

/// Decodes the first frame in `buf`, skipping any garbage before the sync octets.
///
/// A CRC or length failure consumes the garbage plus the bad sync pair so the
/// next call resynchronizes on whatever follows.
pub fn decode_link_frame(buf: &[u8]) -> Result<DecodedFrame, LinkError> {
    let Some(p) = find_sync(buf) else {
        let keep = usize::from(buf.last() == Some(&START_BYTES[0]));
        return Err(LinkError::Incomplete {
            skipped: buf.len() - keep,
        });
    };
    let rest = &buf[p..];
    if rest.len() < HEADER_LEN {
        return Err(LinkError::Incomplete { skipped: p });
    }
    let expected = u16::from_le_bytes([rest[8], rest[9]]);
    if crc_dnp(&rest[..8]) != expected {
        return Err(LinkError::HeaderCrc { consumed: p + 2 });
    }
    let length = rest[2];
    if length < 5 {
        return Err(LinkError::BadLength {
            length,
            consumed: p + 2,
        });
    }
    let user_len = length as usize - 5;
    let total = HEADER_LEN + body_len(user_len);
    if rest.len() < total {
        return Err(LinkError::Incomplete { skipped: p });
    }
    let mut user_data = Vec::with_capacity(user_len);
    let mut pos = HEADER_LEN;
    let mut remaining = user_len;
    while remaining > 0 {
        let n = remaining.min(BLOCK_LEN);
        let block = &rest[pos..pos + n];
        let crc = u16::from_le_bytes([rest[pos + n], rest[pos + n + 1]]);
        if crc_dnp(block) != crc {
            return Err(LinkError::BodyCrc { consumed: p + 2 });
        }
        user_data.extend_from_slice(block);
        pos += n + 2;
        remaining -= n;
    }
    Ok(DecodedFrame {
        frame: LinkFrame {
            control: LinkControl::from_byte(rest[3]),
            destination: u16::from_le_bytes([rest[4], rest[5]]),
            source: u16::from_le_bytes([rest[6], rest[7]]),
            user_data,
        },
        consumed: p + total,
        skipped: p,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub frames: u64,
    pub garbage_octets: u64,
    pub crc_errors: u64,
    pub length_errors: u64,
}

/// Accumulates a byte stream and yields complete frames.
#[derive(Debug, Default)]
pub struct LinkReader {
    buf: Vec<u8>,
    stats: LinkStats,
}

impl LinkReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Returns the next complete frame, or `None` when more input is needed.
    pub fn next_frame(&mut self) -> Option<LinkFrame> {
        loop {
            match decode_link_frame(&self.buf) {
                Ok(d) => {
                    self.stats.frames += 1;
                    self.stats.garbage_octets += d.skipped as u64;
                    self.buf.drain(..d.consumed);
                    return Some(d.frame);
                }
                Err(LinkError::Incomplete { skipped }) => {
                    self.stats.garbage_octets += skipped as u64;
                    self.buf.drain(..skipped);
                    return None;
                }
                Err(e) => {
                    match e {
                        LinkError::BadLength { .. } => self.stats.length_errors += 1,
                        _ => self.stats.crc_errors += 1,
                    }
                    // garbage before the sync pair plus the pair itself
                    self.stats.garbage_octets += e.consumed().saturating_sub(2) as u64;
                    self.buf.drain(..e.consumed());
                }
            }
        }
    }
}
