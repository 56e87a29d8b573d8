//! Append-only record of every executed control, merged by identity.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const DEFAULT_LOG_ENTRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandLogEntry {
    /// Wall-clock ms of the first and latest occurrence.
    pub first_time_ms: u64,
    pub last_time_ms: u64,
    /// Simulation time (s) of the latest occurrence.
    pub sim_time_s: f64,
    /// Link address of the issuing master.
    pub source_address: u16,
    pub peer: String,
    pub outstation: u16,
    pub tag: String,
    pub point_type: String,
    pub index: u16,
    /// OPERATE or DIRECT_OPERATE.
    pub function: String,
    /// CROB code name or "ANALOG".
    pub command: String,
    pub value: Option<f64>,
    pub status: String,
    pub count: u64,
}

impl CommandLogEntry {
    fn same_command(&self, other: &CommandLogEntry) -> bool {
        self.source_address == other.source_address
            && self.outstation == other.outstation
            && self.tag == other.tag
            && self.index == other.index
            && self.point_type == other.point_type
            && self.function == other.function
            && self.command == other.command
            && self.value.map(f64::to_bits) == other.value.map(f64::to_bits)
            && self.status == other.status
    }
}

pub fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug)]
struct Inner {
    /// Oldest first; an entry moves to the back when it repeats.
    entries: Vec<CommandLogEntry>,
    file: Option<File>,
}

/// Command history kept in memory (bounded) and optionally mirrored to a
/// JSON-lines file, one line per occurrence.
#[derive(Debug)]
pub struct CommandLog {
    inner: Mutex<Inner>,
    limit: usize,
}

impl Default for CommandLog {
    fn default() -> Self {
        Self::new(DEFAULT_LOG_ENTRIES)
    }
}

impl CommandLog {
    pub fn new(limit: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                entries: Vec::new(),
                file: None,
            }),
            limit: limit.max(1),
        }
    }

    /// Also appends each occurrence to `path`.
    pub fn with_file(limit: usize, path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let log = Self::new(limit);
        log.inner.lock().expect("log lock").file = Some(file);
        Ok(log)
    }

    /// Records one occurrence (`entry.count` is ignored) and returns the merged entry.
    pub fn record(&self, mut entry: CommandLogEntry) -> CommandLogEntry {
        entry.count = 1;
        let mut inner = self.inner.lock().expect("log lock");
        if let Some(file) = inner.file.as_mut() {
            let line = serde_json::to_string(&entry).expect("entry serializes");
            if let Err(e) = writeln!(file, "{line}").and_then(|_| file.flush()) {
                tracing::warn!(error = %e, "command log write failed");
            }
        }
        let merged = match inner.entries.iter().position(|e| e.same_command(&entry)) {
            Some(i) => {
                let mut old = inner.entries.remove(i);
                old.count += 1;
                old.last_time_ms = entry.last_time_ms;
                old.sim_time_s = entry.sim_time_s;
                old.peer = entry.peer;
                old
            }
            None => entry,
        };
        inner.entries.push(merged.clone());
        if inner.entries.len() > self.limit {
            let excess = inner.entries.len() - self.limit;
            inner.entries.drain(..excess);
        }
        merged
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("log lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Newest-first page.
    pub fn page(&self, offset: usize, limit: usize) -> Vec<CommandLogEntry> {
        let inner = self.inner.lock().expect("log lock");
        inner.entries.iter().rev().skip(offset).take(limit).cloned().collect()
    }

    pub fn entries(&self) -> Vec<CommandLogEntry> {
        self.page(0, usize::MAX)
    }

    pub fn flush(&self) -> io::Result<()> {
        match self.inner.lock().expect("log lock").file.as_mut() {
            Some(f) => f.sync_data(),
            None => Ok(()),
        }
    }
}
