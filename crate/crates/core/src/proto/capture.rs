//! Line-oriented traffic capture and its decoder.
//!
//! Each record is one line: `<wall ms> <connection> <M|O> <hex octets>`,
//! where `M` marks bytes sent by the master and `O` bytes sent by the
//! outstation. Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use super::dump::FrameDumper;
use super::link::LinkReader;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub time_ms: u64,
    pub connection: u64,
    pub from_master: bool,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct CaptureError {
    pub line: usize,
    pub reason: String,
}

impl CaptureRecord {
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {} {} ",
            self.time_ms,
            self.connection,
            if self.from_master { 'M' } else { 'O' }
        );
        for b in &self.bytes {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    /// Parses one line; `Ok(None)` for blanks and comments.
    pub fn parse(line: &str) -> Result<Option<Self>, String> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let mut parts = line.split_whitespace();
        let mut field = |name: &str| parts.next().ok_or_else(|| format!("missing {name}"));
        let time_ms = field("time")?.parse().map_err(|_| "bad time".to_string())?;
        let connection = field("connection")?.parse().map_err(|_| "bad connection id".to_string())?;
        let from_master = match field("direction")? {
            "M" => true,
            "O" => false,
            other => return Err(format!("direction must be M or O, got {other}")),
        };
        let hex = field("octets")?;
        if hex.len() % 2 != 0 {
            return Err("odd number of hex digits".into());
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|_| "bad hex octets".to_string())?;
        if parts.next().is_some() {
            return Err("trailing fields".into());
        }
        Ok(Some(Self {
            time_ms,
            connection,
            from_master,
            bytes,
        }))
    }
}

/// Decodes a whole capture into one rendered line per link frame.
pub fn dump_capture(text: &str) -> Result<Vec<String>, CaptureError> {
    let mut readers: HashMap<(u64, bool), LinkReader> = HashMap::new();
    let mut dumpers: HashMap<u64, FrameDumper> = HashMap::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let rec = match CaptureRecord::parse(line) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(reason) => return Err(CaptureError { line: n + 1, reason }),
        };
        let reader = readers.entry((rec.connection, rec.from_master)).or_default();
        reader.push(&rec.bytes);
        let dumper = dumpers.entry(rec.connection).or_default();
        while let Some(frame) = reader.next_frame() {
            out.push(format!("{} #{} {}", rec.time_ms, rec.connection, dumper.line(&frame)));
        }
    }
    Ok(out)
}
