use std::fs::File;
use std::io::{self, LineWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use gridwire_core::proto::CaptureRecord;
use tracing::warn;

use crate::command_log::wall_clock_ms;

/// Appends socket traffic to a capture file readable by `dump_capture`.
pub struct Capture {
    out: Mutex<LineWriter<File>>,
}

impl Capture {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self {
            out: Mutex::new(LineWriter::new(File::create(path)?)),
        })
    }

    pub fn record(&self, connection: u64, from_master: bool, bytes: &[u8]) {
        let line = CaptureRecord {
            time_ms: wall_clock_ms(),
            connection,
            from_master,
            bytes: bytes.to_vec(),
        }
        .to_line();
        if let Err(e) = writeln!(self.out.lock().expect("capture lock"), "{line}") {
            warn!(error = %e, "capture write failed");
        }
    }
}
