//! Session and master configuration, loadable from TOML.

use std::collections::HashSet;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SERVER_PORT: u16 = 20000;
/// Highest link address usable by a station.
pub const MAX_DNP_ADDRESS: u16 = 65519;
pub const BACKOFF_CAP: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("session {session}: {reason}")]
    Invalid { session: String, reason: String },
    #[error("session name {0} used more than once")]
    DuplicateName(String),
    #[error("session {session}: outstation {outstation} is not in the point map")]
    UnknownOutstation { session: String, outstation: u16 },
    #[error("point map: {0}")]
    Map(String),
}

fn default_port() -> u16 {
    DEFAULT_SERVER_PORT
}
fn default_client_address() -> u16 {
    1
}
fn default_integrity() -> f64 {
    60.0
}
fn default_class() -> f64 {
    2.0
}
fn default_timeout() -> f64 {
    5.0
}
fn default_retries() -> u32 {
    3
}
fn default_reconnect() -> f64 {
    1.0
}

/// One master session talking to one outstation over its own TCP connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub name: String,
    pub server_ip: IpAddr,
    #[serde(default = "default_port")]
    pub server_port: u16,
    pub server_dnp_address: u16,
    #[serde(default = "default_client_address")]
    pub client_dnp_address: u16,
    /// Seconds.
    #[serde(default = "default_integrity")]
    pub integrity_poll_period: f64,
    /// Seconds.
    #[serde(default = "default_class")]
    pub class123_poll_period: f64,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub poll_timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First reconnect delay in seconds; doubles per failure up to 30 s.
    #[serde(default = "default_reconnect")]
    pub reconnect_delay: f64,
}

impl SessionConfig {
    /// A session with the default periods.
    pub fn new(name: impl Into<String>, server: SocketAddr, server_dnp_address: u16) -> Self {
        Self {
            name: name.into(),
            server_ip: server.ip(),
            server_port: server.port(),
            server_dnp_address,
            client_dnp_address: default_client_address(),
            integrity_poll_period: default_integrity(),
            class123_poll_period: default_class(),
            poll_timeout: default_timeout(),
            max_retries: default_retries(),
            reconnect_delay: default_reconnect(),
        }
    }

    pub fn server_addr(&self) -> SocketAddr {
        SocketAddr::new(self.server_ip, self.server_port)
    }

    pub fn integrity_period(&self) -> Duration {
        Duration::from_secs_f64(self.integrity_poll_period)
    }

    pub fn class_period(&self) -> Duration {
        Duration::from_secs_f64(self.class123_poll_period)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.poll_timeout)
    }

    pub fn reconnect(&self) -> Duration {
        Duration::from_secs_f64(self.reconnect_delay)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::Invalid {
            session: self.name.clone(),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(bad("name is empty".into()));
        }
        for (what, v) in [
            ("integrity_poll_period", self.integrity_poll_period),
            ("class123_poll_period", self.class123_poll_period),
            ("poll_timeout", self.poll_timeout),
            ("reconnect_delay", self.reconnect_delay),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{what} must be a positive number of seconds")));
            }
        }
        if self.poll_timeout >= self.integrity_poll_period {
            return Err(bad("poll_timeout must be shorter than integrity_poll_period".into()));
        }
        if self.max_retries == 0 {
            return Err(bad("max_retries must be at least 1".into()));
        }
        for (what, a) in [
            ("server_dnp_address", self.server_dnp_address),
            ("client_dnp_address", self.client_dnp_address),
        ] {
            if a > MAX_DNP_ADDRESS {
                return Err(bad(format!("{what} {a} exceeds {MAX_DNP_ADDRESS}")));
            }
        }
        if self.server_dnp_address == self.client_dnp_address {
            return Err(bad("server and client addresses must differ".into()));
        }
        Ok(())
    }
}

/// Master config file: the point map to bind tags against and the sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterConfig {
    /// Point map path, relative to the config file.
    pub map: PathBuf,
    #[serde(default, rename = "session")]
    pub sessions: Vec<SessionConfig>,
}

impl MasterConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: MasterConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves the map path against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.map.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.map = dir.join(&cfg.map);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_sessions(&self.sessions)
    }
}

pub fn validate_sessions(sessions: &[SessionConfig]) -> Result<(), ConfigError> {
    let mut names = HashSet::new();
    for s in sessions {
        s.validate()?;
        if !names.insert(s.name.as_str()) {
            return Err(ConfigError::DuplicateName(s.name.clone()));
        }
    }
    Ok(())
}
