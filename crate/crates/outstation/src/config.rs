use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use crate::database::AnalogEncoding;
use crate::events::DEFAULT_EVENT_CAPACITY;

pub const DEFAULT_PORT: u16 = 20000;
pub const DEFAULT_MAX_FRAGMENT: usize = 2048;
pub const MIN_MAX_FRAGMENT: usize = 64;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// Largest response fragment, in octets.
    pub max_fragment: usize,
    /// Per-class event buffer capacity for each outstation.
    pub event_capacity: usize,
    pub select_timeout: Duration,
    /// How long a multi-fragment or event response waits for the master's confirm.
    pub confirm_timeout: Duration,
    /// Encoding for g30/g40 when the master asks for variation 0 or a class 0 poll.
    pub static_analog: AnalogEncoding,
    /// Encoding for analog events (g32v7 or g32v3).
    pub event_analog: AnalogEncoding,
    /// JSON-lines command log file.
    pub command_log: Option<PathBuf>,
    /// Raw traffic capture file, one hex record per socket read or write.
    pub capture: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from((Ipv4Addr::UNSPECIFIED, DEFAULT_PORT)),
            max_fragment: DEFAULT_MAX_FRAGMENT,
            event_capacity: DEFAULT_EVENT_CAPACITY,
            select_timeout: Duration::from_secs(10),
            confirm_timeout: Duration::from_secs(5),
            static_analog: AnalogEncoding::Float,
            event_analog: AnalogEncoding::Int32,
            command_log: None,
            capture: None,
        }
    }
}

impl ServerConfig {
    pub fn with_bind(mut self, bind: SocketAddr) -> Self {
        self.bind = bind;
        self
    }
}
