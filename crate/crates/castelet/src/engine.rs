//! The show engine: cue cursor, deferred cue steps, one state machine per
//! avatar, live stream intake, recording and frame composition.
//!
//! Commands land between ticks. Everything that changes the output goes
//! through [`Engine::apply`] or [`Engine::tick`], which is what makes a
//! session log sufficient to rebuild every frame.

use std::path::PathBuf;
use std::sync::Arc;

use castelet_core::clips::Take;
use castelet_core::error::{ClipError, FsmError, SceneError};
use castelet_core::fsm::{FsmSnapshot, FsmState, LiveOutcome, StateLabel, SuspendOutcome, TriggerOutcome};
use castelet_core::scene::{compose_frame, RenderFrame};
use castelet_core::skeleton::Pose;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{serialize_bvh, take_to_bvh};
use crate::log::{frame_hash, EventLog, LogEvent, LogRecord};
use crate::mailbox::{StreamHealth, StreamHub};
use crate::show::{CueStep, Show};

/// Operator commands, shared by the control protocol, render scripts and
/// session logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "args", rename_all = "snake_case")]
pub enum Command {
    Go,
    Back,
    Goto { index: usize },
    Suspend { oav: String },
    SetLive { oav: String, on: bool },
    Reset,
    StartRecording { oav: String },
    StopRecording,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Go => "go",
            Command::Back => "back",
            Command::Goto { .. } => "goto",
            Command::Suspend { .. } => "suspend",
            Command::SetLive { .. } => "set_live",
            Command::Reset => "reset",
            Command::StartRecording { .. } => "start_recording",
            Command::StopRecording => "stop_recording",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("index out of range")]
    IndexOutOfRange { index: usize, cues: usize },
    #[error("no cue left to fire")]
    EndOfShow,
    #[error("unknown oav `{0}`")]
    UnknownOav(String),
    #[error("oav `{0}` is not live")]
    NotLive(String),
    #[error("already recording oav `{0}`")]
    AlreadyRecording(String),
    #[error("no recording in progress")]
    NotRecording,
    #[error("recording failed: {0}")]
    Recording(String),
    #[error("oav `{oav}`: {source}")]
    Fsm { oav: String, source: FsmError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("tick duration must be positive, got {0}")]
    BadDt(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOutcome {
    Trigger { oav: String, action: String, outcome: TriggerOutcome },
    Suspend { oav: String, outcome: SuspendOutcome },
    SetLive { oav: String, outcome: LiveOutcome },
    Effect,
    Deferred { due_tick: u64 },
    Failed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    #[serde(flatten)]
    pub outcome: StepOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CommandResult {
    Fired { cue: usize, label: String, steps: Vec<StepReport> },
    Moved { warnings: Vec<String> },
    Suspend { outcome: SuspendOutcome },
    SetLive { outcome: LiveOutcome },
    Reset,
    RecordingStarted { oav: String },
    RecordingStopped { oav: String, samples: usize, duration: f64, path: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandReply {
    pub command: &'static str,
    pub tick: u64,
    pub clock: f64,
    pub cursor: usize,
    #[serde(flatten)]
    pub result: CommandResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    /// Steps that ran after a wait.
    CueContinued { cue: usize, steps: Vec<StepReport> },
    RecordingWriteFailed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OavStatus {
    pub id: String,
    pub fsm: FsmSnapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PendingStatus {
    pub cue: usize,
    pub next_step: usize,
    pub due_tick: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordingStatus {
    pub oav: String,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineSnapshot {
    pub tick: u64,
    pub clock: f64,
    pub cursor: usize,
    pub cue_count: usize,
    pub next_cue: Option<String>,
    pub oavs: Vec<OavStatus>,
    pub pending: Vec<PendingStatus>,
    pub recording: Option<RecordingStatus>,
    pub streams: Vec<StreamHealth>,
    pub events: Vec<EngineEvent>,
}

#[derive(Clone, Debug)]
struct Pending {
    due: u64,
    order: u64,
    cue: usize,
    next_step: usize,
}

#[derive(Clone, Debug)]
struct Recording {
    oav: usize,
    frame_time: Option<f64>,
    poses: Vec<Pose>,
}

/// One tick's results.
#[derive(Clone, Debug)]
pub struct TickOutput {
    pub frame: RenderFrame,
    pub hash: String,
    pub snapshot: EngineSnapshot,
    /// The avatar output poses the frame was composed from.
    pub poses: Vec<Pose>,
}

pub struct Engine {
    initial: Show,
    show: Show,
    tick: u64,
    clock: f64,
    cursor: usize,
    pending: Vec<Pending>,
    pending_order: u64,
    /// Last source pose taken from each mailbox.
    stream: Vec<Option<Pose>>,
    hub: Arc<StreamHub>,
    recording: Option<Recording>,
    last_take: Option<(String, Take)>,
    recording_dir: Option<PathBuf>,
    events: Vec<EngineEvent>,
    log: Option<EventLog>,
    state_key: String,
    state_version: u64,
}

impl Engine {
    pub fn new(show: Show) -> Self {
        let ids = show.scene.oavs.iter().map(|o| o.id.clone()).collect();
        let n = show.scene.oavs.len();
        Engine {
            initial: show.clone(),
            show,
            tick: 0,
            clock: 0.0,
            cursor: 0,
            pending: Vec::new(),
            pending_order: 0,
            stream: vec![None; n],
            hub: Arc::new(StreamHub::new(ids)),
            recording: None,
            last_take: None,
            recording_dir: None,
            events: Vec::new(),
            log: None,
            state_key: String::new(),
            state_version: 0,
        }
    }

    /// Starts a session log; the first record names the bundle.
    pub fn with_log(mut self, mut log: EventLog) -> Self {
        let _ = log.append(&LogRecord {
            tick: self.tick,
            source: "session".into(),
            event: LogEvent::Session {
                show: self.show.dir.display().to_string(),
                title: self.show.title.clone(),
                tick_rate: self.show.tick_rate,
            },
        });
        self.log = Some(log);
        self
    }

    /// Where stopped recordings are written as BVH.
    pub fn with_recording_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.recording_dir = Some(dir.into());
        self
    }

    pub fn show(&self) -> &Show {
        &self.show
    }

    pub fn hub(&self) -> Arc<StreamHub> {
        Arc::clone(&self.hub)
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Bumped whenever the operator-visible state changes.
    pub fn state_version(&self) -> u64 {
        self.state_version
    }

    pub fn last_take(&self) -> Option<&(String, Take)> {
        self.last_take.as_ref()
    }

    pub fn flush_log(&mut self) {
        if let Some(l) = &mut self.log {
            let _ = l.flush();
        }
    }

    fn log(&mut self, source: &str, event: LogEvent) {
        if let Some(l) = &mut self.log {
            let _ = l.append(&LogRecord {
                tick: self.tick,
                source: source.into(),
                event,
            });
        }
    }

    fn oav(&self, id: &str) -> Result<usize, EngineError> {
        self.show.oav_index(id).ok_or_else(|| EngineError::UnknownOav(id.into()))
    }

    fn fsm_err(&self, i: usize) -> impl FnOnce(FsmError) -> EngineError {
        let oav = self.show.scene.oavs[i].id.clone();
        move |source| EngineError::Fsm { oav, source }
    }

    fn reply(&self, command: &Command, result: CommandResult) -> CommandReply {
        CommandReply {
            command: command.name(),
            tick: self.tick,
            clock: self.clock,
            cursor: self.cursor,
            result,
        }
    }

    /// Applies one operator command before the next tick. `source` only goes
    /// into the log.
    pub fn apply(&mut self, command: &Command, source: &str) -> Result<CommandReply, EngineError> {
        self.log(
            source,
            LogEvent::Command {
                command: command.clone(),
            },
        );
        let result = match command {
            Command::Go => {
                let cue = self.cursor;
                if cue >= self.show.cues.len() {
                    return Err(EngineError::EndOfShow);
                }
                self.cursor += 1;
                let steps = self.run_steps(cue, 0);
                CommandResult::Fired {
                    cue,
                    label: self.show.cues[cue].label.clone(),
                    steps,
                }
            }
            Command::Back => {
                self.cursor = self.cursor.saturating_sub(1);
                CommandResult::Moved {
                    warnings: self.busy_warnings(),
                }
            }
            Command::Goto { index } => {
                if *index >= self.show.cues.len() {
                    return Err(EngineError::IndexOutOfRange {
                        index: *index,
                        cues: self.show.cues.len(),
                    });
                }
                self.cursor = *index;
                CommandResult::Moved {
                    warnings: self.busy_warnings(),
                }
            }
            Command::Suspend { oav } => {
                let i = self.oav(oav)?;
                let err = self.fsm_err(i);
                let outcome = self.show.fsms[i].suspend(&self.show.library).map_err(err)?;
                CommandResult::Suspend { outcome }
            }
            Command::SetLive { oav, on } => {
                let i = self.oav(oav)?;
                let err = self.fsm_err(i);
                let outcome = self.show.fsms[i].set_live(*on, &self.show.library).map_err(err)?;
                CommandResult::SetLive { outcome }
            }
            Command::Reset => {
                self.show = self.initial.clone();
                self.clock = 0.0;
                self.cursor = 0;
                self.pending.clear();
                self.recording = None;
                self.stream.iter_mut().for_each(|s| *s = None);
                self.hub.clear_pending();
                CommandResult::Reset
            }
            Command::StartRecording { oav } => {
                let i = self.oav(oav)?;
                if let Some(r) = &self.recording {
                    return Err(EngineError::AlreadyRecording(self.show.scene.oavs[r.oav].id.clone()));
                }
                if *self.show.fsms[i].state() != FsmState::Live {
                    return Err(EngineError::NotLive(oav.clone()));
                }
                self.recording = Some(Recording {
                    oav: i,
                    frame_time: None,
                    poses: Vec::new(),
                });
                CommandResult::RecordingStarted { oav: oav.clone() }
            }
            Command::StopRecording => {
                let rec = self.recording.take().ok_or(EngineError::NotRecording)?;
                let id = self.show.scene.oavs[rec.oav].id.clone();
                let frame_time = rec.frame_time.unwrap_or(self.show.tick_duration());
                let take = Take::new(format!("{id}-take-{}", self.tick), self.show.rig_names[rec.oav].clone(), frame_time, rec.poses)
                    .map_err(|e: ClipError| EngineError::Recording(e.to_string()))?;
                let path = match self.write_take(rec.oav, &take) {
                    Ok(p) => p,
                    Err(message) => {
                        self.events.push(EngineEvent::RecordingWriteFailed { message });
                        None
                    }
                };
                let (samples, duration) = (take.len(), take.duration());
                self.last_take = Some((id.clone(), take));
                CommandResult::RecordingStopped {
                    oav: id,
                    samples,
                    duration,
                    path,
                }
            }
        };
        self.refresh_state_version();
        Ok(self.reply(command, result))
    }

    fn write_take(&self, oav: usize, take: &Take) -> Result<Option<String>, String> {
        let Some(dir) = &self.recording_dir else { return Ok(None) };
        let rig = &self.show.rigs[&self.show.rig_names[oav]];
        let doc = take_to_bvh(&rig.file_skeleton, take, rig.unit_scale).map_err(|e| e.to_string())?;
        let path = dir.join(format!("{}.bvh", take.id));
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(&path, serialize_bvh(&doc)))
            .map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Some(path.display().to_string()))
    }

    fn busy_warnings(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .show
            .fsms
            .iter()
            .zip(&self.show.scene.oavs)
            .filter(|(f, _)| !matches!(f.state().label(), StateLabel::Idle | StateLabel::Live))
            .map(|(f, o)| format!("oav `{}` is mid-action ({})", o.id, f.state().label()))
            .collect();
        if !self.pending.is_empty() {
            out.push(format!("{} deferred cue step group(s) still pending", self.pending.len()));
        }
        out
    }

    /// Runs steps of `cue` from `from` until the end or a wait.
    fn run_steps(&mut self, cue: usize, from: usize) -> Vec<StepReport> {
        let steps = self.show.cues[cue].steps.clone();
        let mut out = Vec::new();
        for (step, s) in steps.iter().enumerate().skip(from) {
            let outcome = match s {
                CueStep::Wait { seconds } => {
                    let ticks = (seconds * self.show.tick_rate).round().max(0.0) as u64;
                    let due = self.tick + ticks;
                    self.pending.push(Pending {
                        due,
                        order: self.pending_order,
                        cue,
                        next_step: step + 1,
                    });
                    self.pending_order += 1;
                    out.push(StepReport {
                        step,
                        outcome: StepOutcome::Deferred { due_tick: due },
                    });
                    return out;
                }
                CueStep::Trigger { oav, action } => self.step_result(oav, |e, i| {
                    let outcome = e.show.fsms[i].trigger_action(action, &e.show.library)?;
                    Ok(StepOutcome::Trigger {
                        oav: oav.clone(),
                        action: action.clone(),
                        outcome,
                    })
                }),
                CueStep::Suspend { oav } => self.step_result(oav, |e, i| {
                    let outcome = e.show.fsms[i].suspend(&e.show.library)?;
                    Ok(StepOutcome::Suspend { oav: oav.clone(), outcome })
                }),
                CueStep::SetLive { oav, on } => self.step_result(oav, |e, i| {
                    let outcome = e.show.fsms[i].set_live(*on, &e.show.library)?;
                    Ok(StepOutcome::SetLive { oav: oav.clone(), outcome })
                }),
                CueStep::Effect { effect } => match self.show.scene.apply(effect) {
                    Ok(()) => StepOutcome::Effect,
                    Err(e) => StepOutcome::Failed { message: e.to_string() },
                },
            };
            out.push(StepReport { step, outcome });
        }
        out
    }

    fn step_result(&mut self, oav: &str, f: impl FnOnce(&mut Self, usize) -> Result<StepOutcome, FsmError>) -> StepOutcome {
        let Some(i) = self.show.oav_index(oav) else {
            return StepOutcome::Failed {
                message: format!("unknown oav `{oav}`"),
            };
        };
        f(self, i).unwrap_or_else(|e| StepOutcome::Failed {
            message: format!("oav `{oav}`: {e}"),
        })
    }

    fn run_due(&mut self) {
        loop {
            let due = self
                .pending
                .iter()
                .enumerate()
                .filter(|(_, p)| p.due <= self.tick)
                .min_by_key(|(_, p)| (p.due, p.order))
                .map(|(i, _)| i);
            let Some(i) = due else { break };
            let p = self.pending.remove(i);
            let steps = self.run_steps(p.cue, p.next_step);
            self.events.push(EngineEvent::CueContinued { cue: p.cue, steps });
        }
    }

    /// Advances everything by `dt` seconds and composes one frame.
    pub fn tick(&mut self, dt: f64) -> Result<TickOutput, EngineError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EngineError::BadDt(dt));
        }
        self.run_due();
        for i in 0..self.stream.len() {
            if let Some((sequence, pose)) = self.hub.take(i) {
                let oav = self.show.scene.oavs[i].id.clone();
                self.log(
                    "mocap",
                    LogEvent::Pose {
                        oav,
                        sequence,
                        pose: pose.clone(),
                    },
                );
                self.stream[i] = Some(pose);
            }
        }
        let mut poses = Vec::with_capacity(self.show.fsms.len());
        let mut statuses = Vec::with_capacity(self.show.fsms.len());
        for i in 0..self.show.fsms.len() {
            let err = self.fsm_err(i);
            let (pose, snapshot) = self.show.fsms[i].tick(dt, &self.show.library, self.stream[i].as_ref()).map_err(err)?;
            poses.push(pose);
            statuses.push(OavStatus {
                id: self.show.scene.oavs[i].id.clone(),
                fsm: snapshot,
            });
        }
        if let Some(r) = &mut self.recording {
            r.frame_time.get_or_insert(dt);
            r.poses.push(poses[r.oav].clone());
        }
        let time = self.clock + dt;
        let frame = compose_frame(&self.show.scene, &poses, self.tick, time)?;
        let hash = frame_hash(&frame);
        self.log("engine", LogEvent::Frame { dt, hash: hash.clone() });
        self.clock = time;
        self.tick += 1;
        let snapshot = EngineSnapshot {
            tick: frame.tick,
            clock: self.clock,
            cursor: self.cursor,
            cue_count: self.show.cues.len(),
            next_cue: self.show.cues.get(self.cursor).map(|c| c.label.clone()),
            oavs: statuses,
            pending: self.pending_status(),
            recording: self.recording.as_ref().map(|r| RecordingStatus {
                oav: self.show.scene.oavs[r.oav].id.clone(),
                samples: r.poses.len(),
            }),
            streams: self.hub.health(),
            events: std::mem::take(&mut self.events),
        };
        self.refresh_state_version();
        if !snapshot.events.is_empty() || snapshot.oavs.iter().any(|o| !o.fsm.transitions.is_empty() || !o.fsm.events.is_empty()) {
            self.state_version += 1;
        }
        Ok(TickOutput {
            frame,
            hash,
            snapshot,
            poses,
        })
    }

    fn pending_status(&self) -> Vec<PendingStatus> {
        let mut v: Vec<_> = self.pending.iter().collect();
        v.sort_by_key(|p| (p.due, p.order));
        v.into_iter()
            .map(|p| PendingStatus {
                cue: p.cue,
                next_step: p.next_step,
                due_tick: p.due,
            })
            .collect()
    }

    fn refresh_state_version(&mut self) {
        let mut key = format!("{}|{}|{:?}", self.cursor, self.pending.len(), self.recording.as_ref().map(|r| r.oav));
        for f in &self.show.fsms {
            key.push('|');
            key.push_str(&format!("{:?}", f.state()));
            for q in f.queue() {
                key.push(',');
                key.push_str(q);
            }
        }
        if key != self.state_key {
            self.state_key = key;
            self.state_version += 1;
        }
    }

    /// Feeds a source-skeleton pose as if it had arrived from the network.
    pub fn submit_stream_pose(&self, oav: usize, sequence: u32, pose: Pose) {
        self.hub.submit(oav, sequence, pose);
    }
}
