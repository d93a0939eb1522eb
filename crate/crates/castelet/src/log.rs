//! Session event logs and frame hashes.
//!
//! A log is NDJSON, one [`LogRecord`] per line, appended in the order things
//! happened. Replaying the records in order through a fresh engine rebuilds
//! every frame.

use std::io::{self, BufRead, Write};

use castelet_core::scene::RenderFrame;
use castelet_core::skeleton::Pose;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Command;

/// Overrides the directory `play` writes session logs to.
pub const LOG_DIR_ENV: &str = "CASTELET_LOG_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub source: String,
    pub event: LogEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent {
    Session { show: String, title: String, tick_rate: f64 },
    Command { command: Command },
    /// A source-skeleton pose taken from an avatar's mailbox.
    Pose { oav: String, sequence: u32, pose: Pose },
    Frame { dt: f64, hash: String },
}

pub struct EventLog {
    out: Box<dyn Write + Send>,
}

impl EventLog {
    pub fn new(out: impl Write + Send + 'static) -> Self {
        EventLog { out: Box::new(out) }
    }

    pub fn append(&mut self, record: &LogRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn read_log(input: impl BufRead) -> io::Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("log line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn frame_json(frame: &RenderFrame) -> Vec<u8> {
    serde_json::to_vec(frame).expect("frames always serialize")
}

/// SHA-256 of the frame's JSON encoding, as lowercase hex.
pub fn frame_hash(frame: &RenderFrame) -> String {
    hex::encode(Sha256::digest(frame_json(frame)))
}

/// Folds per-frame hashes into one digest for a whole run.
#[derive(Clone, Default)]
pub struct HashChain {
    hasher: Sha256,
    frames: u64,
}

impl HashChain {
    pub fn new() -> Self {
        HashChain::default()
    }

    pub fn push(&mut self, frame_hash: &str) {
        self.hasher.update(frame_hash.as_bytes());
        self.frames += 1;
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}
