//! Per-avatar animation state machine.
//!
//! Two buses each mix an idle channel with an action channel
//! (`channel_weight`: 0 = idle only, 1 = action only). The output crossfades
//! between the buses (`bus_crossfade`: 0 = bus A, 1 = bus B) and can be
//! overridden by a retargeted live stream (`live_weight`).
//!
//! * Entering an action ramps the channel weight of the audible bus.
//! * Anything that swaps the idle content of the mix (an action reaching its
//!   end idle, a suspend, leaving live mode) loads the other bus and
//!   crossfades to it, so nothing audible is ever replaced in place.
//!
//! Every ramp is linear in elapsed time and clamped to its endpoints.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::clips::{default_sampler, sample_clip, AnimationClip, ClipLibrary, IdleSampler};
use crate::error::{ClipError, FsmError};
use crate::retarget::{retarget_pose, BoundRetarget};
use crate::skeleton::{lerp_pose, pose_distance, Pose};

/// Default crossfade duration in seconds.
pub const DEFAULT_FADE_DURATION: f64 = 0.4;

const RAMP_EPSILON: f64 = 1e-9;

/// Maps ramp progress in `[0, 1]` to blend progress in `[0, 1]`.
pub type Easing = fn(f64) -> f64;

pub fn linear(x: f64) -> f64 {
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ramp {
    from: f64,
    to: f64,
    elapsed: f64,
    duration: f64,
}

impl Ramp {
    fn new(from: f64, to: f64, duration: f64) -> Self {
        Ramp {
            from,
            to,
            elapsed: 0.0,
            duration,
        }
    }

    fn done(&self) -> bool {
        self.duration <= 0.0 || self.elapsed >= self.duration - RAMP_EPSILON
    }

    fn value(&self, easing: Easing) -> f64 {
        if self.done() {
            return self.to;
        }
        let p = easing((self.elapsed / self.duration).clamp(0.0, 1.0)).clamp(0.0, 1.0);
        (self.from + (self.to - self.from) * p).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Slot {
    pub clip: String,
    pub clock: f64,
}

impl Slot {
    fn new(clip: impl Into<String>, clock: f64) -> Self {
        Slot {
            clip: clip.into(),
            clock,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Bus {
    pub idle: Slot,
    pub action: Option<Slot>,
    /// 0 = idle only, 1 = action only.
    pub channel_weight: f64,
}

impl Bus {
    fn idle_only(idle: Slot) -> Self {
        Bus {
            idle,
            action: None,
            channel_weight: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "state", rename_all = "snake_case"))]
pub enum FsmState {
    Idle { idle: String },
    TransitionIn { action: String },
    Acting { action: String },
    TransitionOut { action: String },
    Suspending { action: String, idle: String },
    Live,
}

impl FsmState {
    pub fn label(&self) -> StateLabel {
        match self {
            FsmState::Idle { .. } => StateLabel::Idle,
            FsmState::TransitionIn { .. } => StateLabel::TransitionIn,
            FsmState::Acting { .. } => StateLabel::Acting,
            FsmState::TransitionOut { .. } => StateLabel::TransitionOut,
            FsmState::Suspending { .. } => StateLabel::Suspending,
            FsmState::Live => StateLabel::Live,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StateLabel {
    Idle,
    TransitionIn,
    Acting,
    TransitionOut,
    Suspending,
    Live,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::Idle,
        StateLabel::TransitionIn,
        StateLabel::Acting,
        StateLabel::TransitionOut,
        StateLabel::Suspending,
        StateLabel::Live,
    ];

    /// The declared transition graph.
    pub fn may_become(self, to: StateLabel) -> bool {
        use StateLabel::*;
        matches!(
            (self, to),
            (Idle, TransitionIn)
                | (TransitionIn, Acting)
                | (Acting, TransitionOut)
                | (TransitionOut, Idle)
                | (Acting, Suspending)
                | (TransitionIn, Suspending)
                | (TransitionOut, Suspending)
                | (Suspending, Idle)
                | (Live, Idle)
        ) || (to == Live && self != Live)
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateLabel::Idle => "idle",
            StateLabel::TransitionIn => "transition_in",
            StateLabel::Acting => "acting",
            StateLabel::TransitionOut => "transition_out",
            StateLabel::Suspending => "suspending",
            StateLabel::Live => "live",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "reason", rename_all = "snake_case"))]
pub enum RejectReason {
    /// The action starts from a different idle than the one playing.
    IdleMismatch { current: String, required: String },
    Live,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::IdleMismatch { current, required } => {
                write!(f, "idle mismatch: playing `{current}`, action starts from `{required}`")
            }
            RejectReason::Live => f.write_str("avatar is under live control"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum TriggerOutcome {
    Accepted,
    Queued { position: usize },
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum SuspendOutcome {
    Suspending { idle: String },
    NoOp { state: StateLabel },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum LiveOutcome {
    Entered,
    Exited { idle: String, clock: f64 },
    NoOp { state: StateLabel },
}

/// Things that happened inside a tick without a direct caller.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "event", rename_all = "snake_case"))]
pub enum FsmEvent {
    QueuedStarted { action: String },
    QueuedRejected { action: String, reason: RejectReason },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "source", rename_all = "snake_case"))]
pub enum MixSource {
    Idle { bus: usize, clip: String },
    Action { bus: usize, clip: String },
    Stream,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MixTerm {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub source: MixSource,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FsmSnapshot {
    pub state: FsmState,
    pub buses: [Bus; 2],
    pub audible_bus: usize,
    pub bus_crossfade: f64,
    pub live_weight: f64,
    pub queue: Vec<String>,
    /// Contribution of each sampled source to the output pose.
    pub mix: Vec<MixTerm>,
    /// State changes since the previous tick, in order.
    pub transitions: Vec<(StateLabel, StateLabel)>,
    pub events: Vec<FsmEvent>,
}

impl FsmSnapshot {
    pub fn mix_sum(&self) -> f64 {
        self.mix.iter().map(|m| m.weight).sum()
    }
}

#[derive(Clone, Debug)]
struct LiveLink {
    binding: Option<BoundRetarget>,
    weight: f64,
    ramp: Option<Ramp>,
    held: Option<Pose>,
    latest: Option<Pose>,
}

#[derive(Clone, Debug)]
pub struct OavFsm {
    skeleton_ref: String,
    joints: usize,
    state: FsmState,
    buses: [Bus; 2],
    audible: usize,
    bus_crossfade: f64,
    crossfade_ramp: Option<Ramp>,
    channel_ramp: Option<Ramp>,
    live: LiveLink,
    fade_duration: f64,
    queue: VecDeque<String>,
    sampler: Arc<dyn IdleSampler>,
    easing: Easing,
    last_output: Pose,
    transitions: Vec<(StateLabel, StateLabel)>,
    events: Vec<FsmEvent>,
}

impl OavFsm {
    pub fn new(
        skeleton_ref: impl Into<String>,
        joints: usize,
        initial_idle: &str,
        fade_duration: f64,
        library: &ClipLibrary,
    ) -> Result<Self, FsmError> {
        let skeleton_ref = skeleton_ref.into();
        let idle = library.get(initial_idle)?;
        if !idle.is_idle() {
            return Err(ClipError::NotIdle(initial_idle.into()).into());
        }
        check_skeleton(idle, &skeleton_ref)?;
        idle.first().check(joints)?;
        let sampler = default_sampler();
        let last_output = sampler.sample(idle, 0.0);
        let bus = Bus::idle_only(Slot::new(initial_idle, 0.0));
        Ok(OavFsm {
            skeleton_ref,
            joints,
            state: FsmState::Idle {
                idle: initial_idle.into(),
            },
            buses: [bus.clone(), bus],
            audible: 0,
            bus_crossfade: 0.0,
            crossfade_ramp: None,
            channel_ramp: None,
            live: LiveLink {
                binding: None,
                weight: 0.0,
                ramp: None,
                held: None,
                latest: None,
            },
            fade_duration: fade_duration.max(0.0),
            queue: VecDeque::new(),
            sampler,
            easing: linear,
            last_output,
            transitions: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn with_live_binding(mut self, binding: BoundRetarget) -> Result<Self, FsmError> {
        if binding.target_len() != self.joints {
            return Err(crate::error::PoseError::CountMismatch {
                expected: self.joints,
                got: binding.target_len(),
            }
            .into());
        }
        self.live.binding = Some(binding);
        Ok(self)
    }

    pub fn with_sampler(mut self, sampler: Arc<dyn IdleSampler>) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_easing(mut self, easing: Easing) -> Self {
        self.easing = easing;
        self
    }

    pub fn state(&self) -> &FsmState {
        &self.state
    }

    pub fn skeleton_ref(&self) -> &str {
        &self.skeleton_ref
    }

    pub fn fade_duration(&self) -> f64 {
        self.fade_duration
    }

    pub fn has_live_binding(&self) -> bool {
        self.live.binding.is_some()
    }

    pub fn live_binding(&self) -> Option<&BoundRetarget> {
        self.live.binding.as_ref()
    }

    pub fn queue(&self) -> impl Iterator<Item = &str> {
        self.queue.iter().map(String::as_str)
    }

    pub fn last_output(&self) -> &Pose {
        &self.last_output
    }

    pub fn audible_bus(&self) -> &Bus {
        &self.buses[self.audible]
    }

    fn set_state(&mut self, next: FsmState) {
        let (from, to) = (self.state.label(), next.label());
        if from != to {
            self.transitions.push((from, to));
        }
        self.state = next;
    }

    fn lookup_action<'a>(&self, id: &str, library: &'a ClipLibrary) -> Result<(&'a AnimationClip, String), FsmError> {
        let clip = library.get(id)?;
        let (start, _) = clip.idles().ok_or_else(|| ClipError::NotAction(id.into()))?;
        check_skeleton(clip, &self.skeleton_ref)?;
        Ok((clip, start.into()))
    }

    /// Operator GO for one action.
    pub fn trigger_action(&mut self, action_id: &str, library: &ClipLibrary) -> Result<TriggerOutcome, FsmError> {
        let (_, start) = self.lookup_action(action_id, library)?;
        match &self.state {
            FsmState::Idle { idle } => {
                if *idle != start {
                    return Ok(TriggerOutcome::Rejected(RejectReason::IdleMismatch {
                        current: idle.clone(),
                        required: start,
                    }));
                }
                self.begin_action(action_id);
                Ok(TriggerOutcome::Accepted)
            }
            FsmState::Live => Ok(TriggerOutcome::Rejected(RejectReason::Live)),
            _ => {
                self.queue.push_back(action_id.into());
                Ok(TriggerOutcome::Queued {
                    position: self.queue.len() - 1,
                })
            }
        }
    }

    fn begin_action(&mut self, action_id: &str) {
        let bus = &mut self.buses[self.audible];
        bus.action = Some(Slot::new(action_id, 0.0));
        bus.channel_weight = 0.0;
        self.channel_ramp = Some(Ramp::new(0.0, 1.0, self.fade_duration));
        self.set_state(FsmState::TransitionIn {
            action: action_id.into(),
        });
    }

    /// Loads `bus` into the silent slot and starts crossfading toward it.
    fn crossfade_to(&mut self, bus: Bus) {
        let other = 1 - self.audible;
        self.buses[other] = bus;
        self.audible = other;
        self.crossfade_ramp = Some(Ramp::new(self.bus_crossfade, other as f64, self.fade_duration));
    }

    /// Blend the running action back into an idle. Lands in the end idle past
    /// the action's midpoint and in the start idle otherwise.
    pub fn suspend(&mut self, library: &ClipLibrary) -> Result<SuspendOutcome, FsmError> {
        let action = match &self.state {
            FsmState::TransitionIn { action } | FsmState::Acting { action } => action.clone(),
            FsmState::TransitionOut { action } => {
                let (_, end) = self.lookup_action(action, library)?.0.idles().expect("action");
                let (action, idle) = (action.clone(), String::from(end));
                self.queue.clear();
                self.set_state(FsmState::Suspending {
                    action,
                    idle: idle.clone(),
                });
                return Ok(SuspendOutcome::Suspending { idle });
            }
            other => return Ok(SuspendOutcome::NoOp { state: other.label() }),
        };
        let (clip, _) = self.lookup_action(&action, library)?;
        let (start, end) = clip.idles().expect("action");
        let clock = self.buses[self.audible].action.as_ref().map_or(0.0, |s| s.clock);
        let progress = clock / clip.duration();
        let (idle_id, idle_clock) = if progress > 0.5 {
            (end, 0.0)
        } else {
            // The action's first pose is the start idle's last one.
            (start, library.get(start)?.duration())
        };
        let idle_id = String::from(idle_id);
        self.channel_ramp = None;
        self.crossfade_to(Bus::idle_only(Slot::new(idle_id.clone(), idle_clock)));
        self.queue.clear();
        self.set_state(FsmState::Suspending {
            action,
            idle: idle_id.clone(),
        });
        Ok(SuspendOutcome::Suspending { idle: idle_id })
    }

    /// Hands the avatar to (or takes it back from) the live stream.
    pub fn set_live(&mut self, on: bool, library: &ClipLibrary) -> Result<LiveOutcome, FsmError> {
        if self.live.binding.is_none() {
            return Err(FsmError::NoLiveBinding);
        }
        let is_live = self.state == FsmState::Live;
        if on {
            if is_live {
                return Ok(LiveOutcome::NoOp { state: StateLabel::Live });
            }
            self.live.held = Some(self.last_output.clone());
            self.live.latest = None;
            self.live.ramp = Some(Ramp::new(self.live.weight, 1.0, self.fade_duration));
            self.queue.clear();
            self.set_state(FsmState::Live);
            return Ok(LiveOutcome::Entered);
        }
        if !is_live {
            return Ok(LiveOutcome::NoOp {
                state: self.state.label(),
            });
        }
        let (idle, clock) = self.nearest_idle(library)?;
        let bus = Bus::idle_only(Slot::new(idle.clone(), clock));
        self.buses = [bus.clone(), bus];
        self.bus_crossfade = self.audible as f64;
        self.crossfade_ramp = None;
        self.channel_ramp = None;
        self.live.ramp = Some(Ramp::new(self.live.weight, 0.0, self.fade_duration));
        self.set_state(FsmState::Idle { idle: idle.clone() });
        Ok(LiveOutcome::Exited { idle, clock })
    }

    /// Brute-force argmin of pose distance over every sample of every idle
    /// clip for this skeleton. Ties go to the earlier clip id, then sample.
    pub fn nearest_idle(&self, library: &ClipLibrary) -> Result<(String, f64), FsmError> {
        let mut best: Option<(f64, &AnimationClip, usize)> = None;
        for clip in library.idles().filter(|c| c.skeleton_ref == self.skeleton_ref) {
            for (i, p) in clip.poses().iter().enumerate() {
                let d = pose_distance(&self.last_output, p)?;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, clip, i));
                }
            }
        }
        let (_, clip, i) = best.ok_or_else(|| FsmError::NoIdle(self.skeleton_ref.clone()))?;
        Ok((clip.id.clone(), i as f64 * clip.frame_time()))
    }

    /// Advances clocks and ramps by `dt`, runs due state changes and samples
    /// the output. `stream_pose` is a source-skeleton mocap pose; it is only
    /// consumed while live.
    pub fn tick(
        &mut self,
        dt: f64,
        library: &ClipLibrary,
        stream_pose: Option<&Pose>,
    ) -> Result<(Pose, FsmSnapshot), FsmError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FsmError::BadDt(dt));
        }
        if self.state == FsmState::Live {
            if let (Some(binding), Some(src)) = (&self.live.binding, stream_pose) {
                self.live.latest = Some(retarget_pose(binding, src)?);
            }
        }
        for bus in &mut self.buses {
            bus.idle.clock += dt;
            if let Some(a) = &mut bus.action {
                a.clock += dt;
            }
        }
        let easing = self.easing;
        if let Some(r) = &mut self.channel_ramp {
            r.elapsed += dt;
            self.buses[self.audible].channel_weight = r.value(easing);
        }
        if let Some(r) = &mut self.crossfade_ramp {
            r.elapsed += dt;
            self.bus_crossfade = r.value(easing);
        }
        if let Some(r) = &mut self.live.ramp {
            r.elapsed += dt;
            self.live.weight = r.value(easing);
            if r.done() {
                self.live.ramp = None;
            }
        }
        self.advance_states(library)?;
        let (pose, mix) = self.sample(library)?;
        self.last_output = pose.clone();
        let snapshot = FsmSnapshot {
            state: self.state.clone(),
            buses: self.buses.clone(),
            audible_bus: self.audible,
            bus_crossfade: self.bus_crossfade,
            live_weight: self.live.weight,
            queue: self.queue.iter().cloned().collect(),
            mix,
            transitions: core::mem::take(&mut self.transitions),
            events: core::mem::take(&mut self.events),
        };
        Ok((pose, snapshot))
    }

    fn advance_states(&mut self, library: &ClipLibrary) -> Result<(), FsmError> {
        // Bounded: each pass either changes state or stops.
        for _ in 0..8 {
            match self.state.clone() {
                FsmState::TransitionIn { action } => {
                    if !self.channel_ramp.is_some_and(|r| r.done()) {
                        return Ok(());
                    }
                    self.channel_ramp = None;
                    self.buses[self.audible].channel_weight = 1.0;
                    self.set_state(FsmState::Acting { action });
                }
                FsmState::Acting { action } => {
                    let clip = library.get(&action)?;
                    let clock = self.buses[self.audible].action.as_ref().map_or(0.0, |s| s.clock);
                    let duration = clip.duration();
                    if clock < duration {
                        return Ok(());
                    }
                    let (_, end) = clip.idles().ok_or_else(|| ClipError::NotAction(action.clone()))?;
                    self.crossfade_to(Bus::idle_only(Slot::new(end, clock - duration)));
                    self.set_state(FsmState::TransitionOut { action });
                }
                FsmState::TransitionOut { action } => {
                    if !self.crossfade_ramp.is_some_and(|r| r.done()) {
                        return Ok(());
                    }
                    let (_, end) = library.get(&action)?.idles().ok_or_else(|| ClipError::NotAction(action.clone()))?;
                    let end = String::from(end);
                    self.land_in_idle(end, library)?;
                }
                FsmState::Suspending { idle, .. } => {
                    if !self.crossfade_ramp.is_some_and(|r| r.done()) {
                        return Ok(());
                    }
                    self.land_in_idle(idle, library)?;
                }
                FsmState::Idle { .. } | FsmState::Live => return Ok(()),
            }
        }
        Ok(())
    }

    fn land_in_idle(&mut self, idle: String, library: &ClipLibrary) -> Result<(), FsmError> {
        self.crossfade_ramp = None;
        self.bus_crossfade = self.audible as f64;
        let silent = 1 - self.audible;
        self.buses[silent].action = None;
        self.buses[silent].channel_weight = 0.0;
        self.set_state(FsmState::Idle { idle: idle.clone() });
        while let Some(next) = self.queue.pop_front() {
            let (_, start) = self.lookup_action(&next, library)?;
            if start == idle {
                self.begin_action(&next);
                self.events.push(FsmEvent::QueuedStarted { action: next });
                break;
            }
            self.events.push(FsmEvent::QueuedRejected {
                action: next,
                reason: RejectReason::IdleMismatch {
                    current: idle.clone(),
                    required: start,
                },
            });
        }
        Ok(())
    }

    fn sample_bus(&self, b: usize, factor: f64, library: &ClipLibrary, mix: &mut Vec<MixTerm>) -> Result<Pose, FsmError> {
        let bus = &self.buses[b];
        let w = bus.channel_weight;
        let action = match &bus.action {
            Some(slot) if w > 0.0 => Some((slot, sample_clip(library.get(&slot.clip)?, slot.clock))),
            _ => None,
        };
        let idle = if w < 1.0 || action.is_none() {
            let clip = library.get(&bus.idle.clip)?;
            Some(self.sampler.sample(clip, bus.idle.clock))
        } else {
            None
        };
        match (idle, action) {
            (Some(i), None) => {
                mix.push(MixTerm {
                    source: MixSource::Idle {
                        bus: b,
                        clip: bus.idle.clip.clone(),
                    },
                    weight: factor,
                });
                Ok(i)
            }
            (None, Some((slot, a))) => {
                mix.push(MixTerm {
                    source: MixSource::Action {
                        bus: b,
                        clip: slot.clip.clone(),
                    },
                    weight: factor,
                });
                Ok(a)
            }
            (Some(i), Some((slot, a))) => {
                mix.push(MixTerm {
                    source: MixSource::Idle {
                        bus: b,
                        clip: bus.idle.clip.clone(),
                    },
                    weight: factor * (1.0 - w),
                });
                mix.push(MixTerm {
                    source: MixSource::Action {
                        bus: b,
                        clip: slot.clip.clone(),
                    },
                    weight: factor * w,
                });
                Ok(lerp_pose(&i, &a, w)?)
            }
            (None, None) => unreachable!("a bus always samples at least one channel"),
        }
    }

    fn sample(&self, library: &ClipLibrary) -> Result<(Pose, Vec<MixTerm>), FsmError> {
        let mut mix = Vec::with_capacity(5);
        let live_w = self.live.weight;
        let live_target = self.live.latest.as_ref().or(self.live.held.as_ref());
        if live_w >= 1.0 {
            if let Some(target) = live_target {
                mix.push(MixTerm {
                    source: MixSource::Stream,
                    weight: 1.0,
                });
                return Ok((target.clone(), mix));
            }
        }
        let c = self.bus_crossfade;
        let base = if c <= 0.0 {
            self.sample_bus(0, 1.0, library, &mut mix)?
        } else if c >= 1.0 {
            self.sample_bus(1, 1.0, library, &mut mix)?
        } else {
            let a = self.sample_bus(0, 1.0 - c, library, &mut mix)?;
            let b = self.sample_bus(1, c, library, &mut mix)?;
            lerp_pose(&a, &b, c)?
        };
        match live_target {
            Some(target) if live_w > 0.0 => {
                for m in &mut mix {
                    m.weight *= 1.0 - live_w;
                }
                mix.push(MixTerm {
                    source: MixSource::Stream,
                    weight: live_w,
                });
                Ok((lerp_pose(&base, target, live_w)?, mix))
            }
            _ => Ok((base, mix)),
        }
    }
}

fn check_skeleton(clip: &AnimationClip, skeleton_ref: &str) -> Result<(), FsmError> {
    if clip.skeleton_ref != skeleton_ref {
        return Err(FsmError::SkeletonMismatch {
            clip: clip.id.clone(),
            clip_skeleton: clip.skeleton_ref.clone(),
            avatar_skeleton: skeleton_ref.into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
