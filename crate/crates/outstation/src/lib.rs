//! DNP3 outstation server backed by the grid simulator. One TCP listener
//! serves every outstation of a point map, routed by link destination address.

pub mod capture;
pub mod command_log;
pub mod config;
mod connection;
pub mod database;
pub mod events;
mod respond;
mod server;

pub use capture::Capture;
pub use command_log::{CommandLog, CommandLogEntry};
pub use config::{ServerConfig, DEFAULT_PORT};
pub use database::{AnalogEncoding, OutstationDb, Scanner};
pub use events::{AnalogReportState, EventRecord, EventStore, EventValue, StoredEvent};
pub use server::{serve, ClientInfo, ServerError, ServerHandle};
