use std::sync::{Arc, Mutex};

use gridwire_core::points::PointMap;
use serde::Serialize;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;

use crate::config::{validate_sessions, ConfigError, SessionConfig};
use crate::session::{spawn_session, SessionHandle, SessionHealth, SessionLogEntry, TagDelta};
use crate::tags::TagEntry;

const DELTA_CAPACITY: usize = 1024;

/// All sessions of one master plus the shared delta feed.
pub struct Master {
    sessions: Vec<SessionHandle>,
    tasks: Mutex<Vec<JoinHandle<()>>>,
    deltas: broadcast::Sender<Arc<TagDelta>>,
    stop: watch::Sender<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionExport {
    pub name: String,
    pub config: SessionConfig,
    pub health: SessionHealth,
    pub tags: Vec<TagEntry>,
}

impl Master {
    /// Starts one session per config. Must run inside a tokio runtime.
    pub fn start(sessions: Vec<SessionConfig>, map: &PointMap) -> Result<Self, ConfigError> {
        validate_sessions(&sessions)?;
        let (deltas, _) = broadcast::channel(DELTA_CAPACITY);
        let (stop, stop_rx) = watch::channel(false);
        let mut handles = Vec::new();
        let mut tasks = Vec::new();
        for cfg in sessions {
            let def = map.outstation(cfg.server_dnp_address).ok_or_else(|| ConfigError::UnknownOutstation {
                session: cfg.name.clone(),
                outstation: cfg.server_dnp_address,
            })?;
            let (h, t) = spawn_session(cfg, def, deltas.clone(), stop_rx.clone());
            handles.push(h);
            tasks.push(t);
        }
        Ok(Self {
            sessions: handles,
            tasks: Mutex::new(tasks),
            deltas,
            stop,
        })
    }

    pub fn sessions(&self) -> &[SessionHandle] {
        &self.sessions
    }

    pub fn session(&self, name: &str) -> Option<&SessionHandle> {
        self.sessions.iter().find(|s| s.name() == name)
    }

    /// The session holding `tag`, with the tag's current entry.
    pub fn find_tag(&self, tag: &str) -> Option<(&SessionHandle, TagEntry)> {
        self.sessions.iter().find_map(|s| s.tag(tag).map(|t| (s, t)))
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TagDelta>> {
        self.deltas.subscribe()
    }

    /// Newest-first session events across all sessions.
    pub fn logs(&self) -> Vec<SessionLogEntry> {
        let mut all: Vec<SessionLogEntry> = self.sessions.iter().flat_map(|s| s.log()).collect();
        all.sort_by_key(|e| std::cmp::Reverse(e.time_ms));
        all
    }

    pub fn export(&self) -> Vec<SessionExport> {
        self.sessions
            .iter()
            .map(|s| SessionExport {
                name: s.name().to_string(),
                config: s.config().clone(),
                health: s.health(),
                tags: s.tags(),
            })
            .collect()
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("export serializes")
    }

    /// Stops every session and waits for the tasks to finish.
    pub async fn shutdown(&self) {
        let _ = self.stop.send(true);
        let tasks = std::mem::take(&mut *self.tasks.lock().expect("task lock"));
        for t in tasks {
            let _ = t.await;
        }
    }
}
