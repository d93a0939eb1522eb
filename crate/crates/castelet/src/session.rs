//! Offline runs: scripted renders and log replays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Command, Engine, EngineError, TickOutput};
use crate::log::{HashChain, LogEvent, LogRecord};

/// A timed list of operator commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    /// Seconds of show time to render.
    pub duration: f64,
    pub events: Vec<ScriptEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEvent {
    pub at: f64,
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub frames: u64,
    pub final_hash: String,
    /// `(tick, message)` for commands the engine refused.
    pub refused: Vec<(u64, String)>,
}

/// Renders `script` at the show's tick rate. Each command lands just before
/// the tick nearest its time.
pub fn render(engine: &mut Engine, script: &Script, mut sink: impl FnMut(&TickOutput)) -> Result<RunSummary, EngineError> {
    let rate = engine.show().tick_rate;
    let dt = 1.0 / rate;
    let frames = (script.duration * rate).round().max(0.0) as u64;
    let mut events: Vec<(u64, &Command)> = script
        .events
        .iter()
        .map(|e| ((e.at * rate).round().max(0.0) as u64, &e.command))
        .collect();
    events.sort_by_key(|(t, _)| *t);
    let mut next = events.into_iter().peekable();
    let mut chain = HashChain::new();
    let mut refused = Vec::new();
    let start = engine.tick_count();
    for k in 0..frames {
        while let Some((_, cmd)) = next.next_if(|(t, _)| *t <= k) {
            if let Err(e) = engine.apply(cmd, "script") {
                refused.push((start + k, format!("{}: {e}", cmd.name())));
            }
        }
        let out = engine.tick(dt)?;
        chain.push(&out.hash);
        sink(&out);
    }
    engine.flush_log();
    Ok(RunSummary {
        frames,
        final_hash: chain.finish(),
        refused,
    })
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("log record at tick {logged} arrived when the engine was at tick {engine}")]
    OutOfSync { logged: u64, engine: u64 },
    #[error("log names unknown oav `{0}`")]
    UnknownOav(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub tick: u64,
    pub logged: String,
    pub replayed: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySummary {
    pub frames: u64,
    pub final_hash: String,
    pub mismatches: Vec<Mismatch>,
}

/// Feeds logged commands and poses through `engine` in order and checks
/// every rebuilt frame against its logged hash.
pub fn replay(engine: &mut Engine, records: &[LogRecord], mut sink: impl FnMut(&TickOutput)) -> Result<ReplaySummary, ReplayError> {
    let mut chain = HashChain::new();
    let mut mismatches = Vec::new();
    for rec in records {
        if !matches!(rec.event, LogEvent::Session { .. }) && rec.tick != engine.tick_count() {
            return Err(ReplayError::OutOfSync {
                logged: rec.tick,
                engine: engine.tick_count(),
            });
        }
        match &rec.event {
            LogEvent::Session { .. } => {}
            LogEvent::Command { command } => {
                let _ = engine.apply(command, &rec.source);
            }
            LogEvent::Pose { oav, sequence, pose } => {
                let i = engine.show().oav_index(oav).ok_or_else(|| ReplayError::UnknownOav(oav.clone()))?;
                engine.submit_stream_pose(i, *sequence, pose.clone());
            }
            LogEvent::Frame { dt, hash } => {
                let out = engine.tick(*dt)?;
                if out.hash != *hash {
                    mismatches.push(Mismatch {
                        tick: out.frame.tick,
                        logged: hash.clone(),
                        replayed: out.hash.clone(),
                    });
                }
                chain.push(&out.hash);
                sink(&out);
            }
        }
    }
    Ok(ReplaySummary {
        frames: chain.frames(),
        final_hash: chain.finish(),
        mismatches,
    })
}
