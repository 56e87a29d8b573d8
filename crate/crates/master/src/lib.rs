//! Software DNP3 master: per-outstation polling sessions, a named tag
//! database with quality, health counters and control issuance.

mod channel;
pub mod config;
mod master;
pub mod session;
pub mod tags;

pub use channel::WireError;
pub use config::{ConfigError, MasterConfig, SessionConfig};
pub use master::{Master, SessionExport};
pub use session::{
    OperateError, OperateMode, OutputRef, PollError, PollKind, SessionHandle, SessionHealth, SessionLogEntry, TagDelta,
};
pub use tags::{PointRef, TagEntry, TagTable, TagValue, Validity};
