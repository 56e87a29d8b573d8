//! DNP3 (IEEE 1815) link, transport and application layer codecs for the
//! object subset the testbed speaks.

pub mod app;
pub mod capture;
pub mod crc;
pub mod dump;
pub mod link;
pub mod objects;
pub mod transport;

use thiserror::Error;

pub use capture::{dump_capture, CaptureError, CaptureRecord};
pub use app::{decode_app_fragment, encode_app_fragment, AppControl, AppFragment, FunctionCode, Iin};
pub use crc::{crc_dnp, verify_block};
pub use link::{decode_link_frame, encode_link_frame, LinkControl, LinkError, LinkFrame, LinkReader};
pub use objects::{
    CommandStatus, ControlCode, Crob, Flags, ObjectBlock, ObjectBody, PointValue, Qualifier, Timestamp,
    Variation,
};
pub use transport::{transport_segment, Reassembler, TransportError, TransportSegment};

/// Application-layer codec errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppError {
    #[error("fragment truncated")]
    Truncated,
    #[error("unknown function code 0x{0:02X}")]
    UnknownFunction(u8),
    #[error("response without IIN")]
    MissingIin,
    #[error("request carrying IIN")]
    UnexpectedIin,
    #[error("unsupported object g{group}v{variation} qualifier 0x{qualifier:02X}")]
    UnsupportedObject { group: u8, variation: u8, qualifier: u8 },
    #[error("object body does not match header for g{group}v{variation}")]
    BodyMismatch { group: u8, variation: u8 },
    #[error("value type does not match g{group}v{variation}")]
    ValueMismatch { group: u8, variation: u8 },
    #[error("range stop {stop} before start {start}")]
    RangeInverted { start: u16, stop: u16 },
    #[error("index {0} does not fit the qualifier")]
    IndexOverflow(usize),
    #[error("object count {0} does not fit the qualifier")]
    CountOverflow(usize),
    #[error("timestamp {0} exceeds 48 bits")]
    TimestampRange(u64),
    #[error("{0} unexpected trailing octets")]
    TrailingData(usize),
}

/// Encodes an application fragment into the link frames that carry it.
pub fn fragment_frames(
    frag: &AppFragment,
    control: LinkControl,
    destination: u16,
    source: u16,
    transport_seq: u8,
) -> Result<Vec<Vec<u8>>, AppError> {
    let bytes = encode_app_fragment(frag)?;
    Ok(transport_segment(&bytes, transport_seq)
        .into_iter()
        .map(|seg| {
            encode_link_frame(&LinkFrame::new(control, destination, source, seg.encode()))
                .expect("transport segment fits a link frame")
        })
        .collect())
}
