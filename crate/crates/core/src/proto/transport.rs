//! Transport function: splits application fragments into link-sized segments.

use thiserror::Error;

/// Payload octets that fit after the transport header in one link frame.
pub const MAX_SEGMENT_PAYLOAD: usize = 249;
/// Default limit on a reassembled application fragment.
pub const DEFAULT_MAX_FRAGMENT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportSegment {
    pub fin: bool,
    pub fir: bool,
    /// 0..=63
    pub sequence: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("empty transport segment")]
    Empty,
    #[error("segment payload of {0} octets exceeds 249")]
    Oversize(usize),
    #[error("reassembled fragment of {size} octets exceeds limit {max}")]
    Overflow { size: usize, max: usize },
}

impl TransportSegment {
    pub fn header(&self) -> u8 {
        (self.fin as u8) << 7 | (self.fir as u8) << 6 | (self.sequence & 0x3F)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.payload.len());
        out.push(self.header());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TransportError> {
        let (&h, payload) = bytes.split_first().ok_or(TransportError::Empty)?;
        if payload.len() > MAX_SEGMENT_PAYLOAD {
            return Err(TransportError::Oversize(payload.len()));
        }
        Ok(Self {
            fin: h & 0x80 != 0,
            fir: h & 0x40 != 0,
            sequence: h & 0x3F,
            payload: payload.to_vec(),
        })
    }
}

/// Splits `app_bytes` into segments numbered from `seq0` (mod 64).
pub fn transport_segment(app_bytes: &[u8], seq0: u8) -> Vec<TransportSegment> {
    if app_bytes.is_empty() {
        return vec![TransportSegment {
            fin: true,
            fir: true,
            sequence: seq0 & 0x3F,
            payload: Vec::new(),
        }];
    }
    let chunks: Vec<&[u8]> = app_bytes.chunks(MAX_SEGMENT_PAYLOAD).collect();
    let last = chunks.len() - 1;
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| TransportSegment {
            fir: i == 0,
            fin: i == last,
            sequence: ((seq0 as usize + i) % 64) as u8,
            payload: chunk.to_vec(),
        })
        .collect()
}

/// Per-session reassembly state.
#[derive(Debug, Clone)]
pub struct Reassembler {
    max_fragment: usize,
    buf: Vec<u8>,
    next_seq: Option<u8>,
}

impl Default for Reassembler {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_FRAGMENT)
    }
}

impl Reassembler {
    pub fn new(max_fragment: usize) -> Self {
        Self {
            max_fragment,
            buf: Vec::new(),
            next_seq: None,
        }
    }

    pub fn in_progress(&self) -> bool {
        self.next_seq.is_some()
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.next_seq = None;
    }

    /// Feeds one segment; returns the fragment once a FIN segment completes it.
    ///
    /// A FIR segment always restarts reassembly. A non-FIR segment with no
    /// reassembly in progress is dropped; one out of sequence discards the
    /// partial buffer.
    pub fn push(&mut self, seg: &TransportSegment) -> Result<Option<Vec<u8>>, TransportError> {
        if seg.fir {
            self.reset();
        } else {
            match self.next_seq {
                None => return Ok(None),
                Some(expected) if expected != seg.sequence => {
                    self.reset();
                    return Ok(None);
                }
                Some(_) => {}
            }
        }
        let size = self.buf.len() + seg.payload.len();
        if size > self.max_fragment {
            self.reset();
            return Err(TransportError::Overflow {
                size,
                max: self.max_fragment,
            });
        }
        self.buf.extend_from_slice(&seg.payload);
        if seg.fin {
            self.next_seq = None;
            Ok(Some(std::mem::take(&mut self.buf)))
        } else {
            self.next_seq = Some((seg.sequence + 1) % 64);
            Ok(None)
        }
    }
}
