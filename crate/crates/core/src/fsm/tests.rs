use super::*;
use crate::math::{Quat, Vec3};
use crate::retarget::{bind_map, RetargetMap};
use crate::skeleton::{Joint, Skeleton};
use alloc::vec;
use alloc::vec::Vec;

const DT: f64 = 0.125;
const FADE: f64 = 0.25;

fn pose(angle: f64) -> Pose {
    Pose {
        root_translation: Vec3::ZERO,
        rotations: vec![Quat::from_axis_angle(Vec3::Y, angle)],
    }
}

fn ramp(from: f64, to: f64, samples: usize) -> Vec<Pose> {
    (0..samples)
        .map(|i| pose(from + (to - from) * i as f64 / (samples - 1) as f64))
        .collect()
}

/// i0 → a1 → i1 → a2 → i2 → a3 → i0, every clip sampled at `DT`.
/// a1 lasts exactly 1 s (9 samples).
fn library() -> ClipLibrary {
    let mut lib = ClipLibrary::new();
    lib.insert(AnimationClip::idle("i0", "sk", DT, ramp(0.0, 0.2, 9)).unwrap()).unwrap();
    lib.insert(AnimationClip::idle("i1", "sk", DT, ramp(1.0, 1.2, 5)).unwrap()).unwrap();
    lib.insert(AnimationClip::idle("i2", "sk", DT, ramp(2.0, 2.1, 5)).unwrap()).unwrap();
    lib.insert(AnimationClip::action("a1", "sk", DT, ramp(0.2, 1.0, 9), "i0", "i1").unwrap()).unwrap();
    lib.insert(AnimationClip::action("a2", "sk", DT, ramp(1.2, 2.0, 9), "i1", "i2").unwrap()).unwrap();
    lib.insert(AnimationClip::action("a3", "sk", DT, ramp(2.1, 0.0, 9), "i2", "i0").unwrap()).unwrap();
    lib
}

fn fsm(lib: &ClipLibrary) -> OavFsm {
    OavFsm::new("sk", 1, "i0", FADE, lib).unwrap()
}

fn skeleton() -> Skeleton {
    Skeleton::new(vec![Joint::new("root", None, Vec3::ZERO)]).unwrap()
}

fn live_fsm(lib: &ClipLibrary) -> OavFsm {
    let s = skeleton();
    let b = bind_map(&RetargetMap::by_shared_names(&s, &s), &s, &s).unwrap();
    fsm(lib).with_live_binding(b).unwrap()
}

fn tick(f: &mut OavFsm, lib: &ClipLibrary) -> FsmSnapshot {
    let (_, snap) = f.tick(DT, lib, None).unwrap();
    assert!((snap.mix_sum() - 1.0).abs() < 1e-12);
    snap
}

#[test]
fn happy_path_reaches_acting_after_fade() {
    let lib = library();
    let mut f = fsm(&lib);
    assert_eq!(f.trigger_action("a1", &lib).unwrap(), TriggerOutcome::Accepted);
    assert_eq!(f.state().label(), StateLabel::TransitionIn);
    let s = tick(&mut f, &lib);
    assert_eq!(s.state.label(), StateLabel::TransitionIn);
    assert_eq!(s.buses[s.audible_bus].channel_weight, 0.5);
    let s = tick(&mut f, &lib);
    assert_eq!(s.state, FsmState::Acting { action: "a1".into() });
    assert_eq!(s.buses[s.audible_bus].channel_weight, 1.0);
    assert_eq!(s.transitions, vec![(StateLabel::TransitionIn, StateLabel::Acting)]);
}

#[test]
fn mismatched_start_idle_rejected() {
    let lib = library();
    let mut f = fsm(&lib);
    assert_eq!(
        f.trigger_action("a2", &lib).unwrap(),
        TriggerOutcome::Rejected(RejectReason::IdleMismatch {
            current: "i0".into(),
            required: "i1".into()
        })
    );
    assert_eq!(f.state().label(), StateLabel::Idle);
    assert!(matches!(f.trigger_action("nope", &lib), Err(FsmError::Clip(ClipError::UnknownClip(_)))));
    assert!(matches!(f.trigger_action("i1", &lib), Err(FsmError::Clip(ClipError::NotAction(_)))));
}

/// Hand-simulated state table for two GOs on chained actions
/// (dt = 0.125 s, fade = 0.25 s, a1 lasts 1 s).
///
/// | tick | state          | audible w | crossfade | note                  |
/// |------|----------------|-----------|-----------|-----------------------|
/// | 0    | TransitionIn   | 0         | 0         | GO a1, GO a2 (queued) |
/// | 1    | TransitionIn   | 0.5       | 0         |                       |
/// | 2    | Acting a1      | 1         | 0         | a1 clock 0.25         |
/// | 3-7  | Acting a1      | 1         | 0         |                       |
/// | 8    | TransitionOut  | 0 (bus 1) | 0         | a1 clock 1.0          |
/// | 9    | TransitionOut  | 0         | 0.5       |                       |
/// | 10   | TransitionIn a2| 0         | 1         | landed i1, a2 drained |
/// | 11   | TransitionIn a2| 0.5       | 1         |                       |
/// | 12   | Acting a2      | 1         | 1         |                       |
#[test]
fn queued_action_fires_after_first_completes() {
    let lib = library();
    let mut f = fsm(&lib);
    assert_eq!(f.trigger_action("a1", &lib).unwrap(), TriggerOutcome::Accepted);
    assert_eq!(f.trigger_action("a2", &lib).unwrap(), TriggerOutcome::Queued { position: 0 });
    use StateLabel::*;
    let table: [(StateLabel, f64, f64); 12] = [
        (TransitionIn, 0.5, 0.0),
        (Acting, 1.0, 0.0),
        (Acting, 1.0, 0.0),
        (Acting, 1.0, 0.0),
        (Acting, 1.0, 0.0),
        (Acting, 1.0, 0.0),
        (Acting, 1.0, 0.0),
        (TransitionOut, 0.0, 0.0),
        (TransitionOut, 0.0, 0.5),
        (TransitionIn, 0.0, 1.0),
        (TransitionIn, 0.5, 1.0),
        (Acting, 1.0, 1.0),
    ];
    for (i, (label, w, c)) in table.iter().enumerate() {
        let s = tick(&mut f, &lib);
        let tick_no = i + 1;
        assert_eq!(s.state.label(), *label, "tick {tick_no}");
        assert_eq!(s.buses[s.audible_bus].channel_weight, *w, "tick {tick_no}");
        assert_eq!(s.bus_crossfade, *c, "tick {tick_no}");
        if tick_no == 10 {
            assert_eq!(s.transitions, vec![(TransitionOut, Idle), (Idle, TransitionIn)]);
            assert_eq!(s.events, vec![FsmEvent::QueuedStarted { action: "a2".into() }]);
            assert_eq!(s.state, FsmState::TransitionIn { action: "a2".into() });
        }
    }
}

#[test]
fn queued_mismatch_is_reported_when_drained() {
    let lib = library();
    let mut f = fsm(&lib);
    f.trigger_action("a1", &lib).unwrap();
    f.trigger_action("a3", &lib).unwrap();
    let mut events = Vec::new();
    for _ in 0..12 {
        events.extend(tick(&mut f, &lib).events);
    }
    assert_eq!(f.state(), &FsmState::Idle { idle: "i1".into() });
    assert_eq!(
        events,
        vec![FsmEvent::QueuedRejected {
            action: "a3".into(),
            reason: RejectReason::IdleMismatch {
                current: "i1".into(),
                required: "i2".into()
            }
        }]
    );
}

#[test]
fn suspend_early_lands_in_start_idle_then_retrigger() {
    let lib = library();
    let mut f = fsm(&lib);
    f.trigger_action("a1", &lib).unwrap();
    tick(&mut f, &lib);
    tick(&mut f, &lib);
    assert_eq!(f.suspend(&lib).unwrap(), SuspendOutcome::Suspending { idle: "i0".into() });
    assert_eq!(f.state().label(), StateLabel::Suspending);
    tick(&mut f, &lib);
    let s = tick(&mut f, &lib);
    assert_eq!(s.state, FsmState::Idle { idle: "i0".into() });
    assert_eq!(s.transitions, vec![(StateLabel::Suspending, StateLabel::Idle)]);
    assert_eq!(s.buses[s.audible_bus].channel_weight, 0.0);
    assert_eq!(f.trigger_action("a1", &lib).unwrap(), TriggerOutcome::Accepted);
}

#[test]
fn suspend_late_lands_in_end_idle() {
    let lib = library();
    let mut f = fsm(&lib);
    f.trigger_action("a1", &lib).unwrap();
    for _ in 0..7 {
        tick(&mut f, &lib);
    }
    assert_eq!(f.state().label(), StateLabel::Acting);
    assert_eq!(f.suspend(&lib).unwrap(), SuspendOutcome::Suspending { idle: "i1".into() });
    tick(&mut f, &lib);
    tick(&mut f, &lib);
    assert_eq!(f.state(), &FsmState::Idle { idle: "i1".into() });
}

#[test]
fn suspend_in_idle_is_reported_noop() {
    let lib = library();
    let mut f = fsm(&lib);
    assert_eq!(f.suspend(&lib).unwrap(), SuspendOutcome::NoOp { state: StateLabel::Idle });
}

#[test]
fn suspend_clears_queue() {
    let lib = library();
    let mut f = fsm(&lib);
    f.trigger_action("a1", &lib).unwrap();
    f.trigger_action("a2", &lib).unwrap();
    f.suspend(&lib).unwrap();
    assert_eq!(f.queue().count(), 0);
}

#[test]
fn idle_steady_state_is_palindrome() {
    let lib = library();
    let mut f = fsm(&lib);
    let idle = lib.get("i0").unwrap();
    for k in 1..40 {
        let (p, s) = f.tick(DT, &lib, None).unwrap();
        let expect = crate::clips::sample_palindrome(idle, k as f64 * DT).unwrap();
        assert!(pose_distance(&p, &expect).unwrap() < 1e-12, "tick {k}");
        assert_eq!(s.mix.len(), 1);
        assert_eq!(s.buses[s.audible_bus].channel_weight, 0.0);
        assert_eq!(s.bus_crossfade, 0.0);
    }
}

#[test]
fn live_requires_binding() {
    let lib = library();
    let mut f = fsm(&lib);
    assert_eq!(f.set_live(true, &lib), Err(FsmError::NoLiveBinding));
}

#[test]
fn live_without_frames_holds_last_pose() {
    let lib = library();
    let mut f = live_fsm(&lib);
    for _ in 0..3 {
        tick(&mut f, &lib);
    }
    let held = f.last_output().clone();
    assert_eq!(f.set_live(true, &lib).unwrap(), LiveOutcome::Entered);
    tick(&mut f, &lib);
    let (p, s) = f.tick(DT, &lib, None).unwrap();
    assert_eq!(s.live_weight, 1.0);
    assert_eq!(p, held);
}

#[test]
fn live_converges_to_stream_after_fade() {
    let lib = library();
    let mut f = live_fsm(&lib);
    f.set_live(true, &lib).unwrap();
    let target = pose(2.5);
    let (p1, s1) = f.tick(DT, &lib, Some(&target)).unwrap();
    assert_eq!(s1.live_weight, 0.5);
    assert!(pose_distance(&p1, &target).unwrap() > 0.1);
    let (p2, s2) = f.tick(DT, &lib, Some(&target)).unwrap();
    assert_eq!(s2.live_weight, 1.0);
    assert_eq!(s2.mix, vec![MixTerm { source: MixSource::Stream, weight: 1.0 }]);
    assert!(pose_distance(&p2, &target).unwrap() < 1e-12);
    assert_eq!(
        f.trigger_action("a1", &lib).unwrap(),
        TriggerOutcome::Rejected(RejectReason::Live)
    );
}

#[test]
fn live_off_picks_nearest_idle_by_brute_force() {
    let lib = library();
    let mut f = live_fsm(&lib);
    f.set_live(true, &lib).unwrap();
    // 1.13 rad sits inside i1's range.
    let target = pose(1.13);
    for _ in 0..3 {
        f.tick(DT, &lib, Some(&target)).unwrap();
    }
    // Independent argmin: 2·acos(|<qa,qb>|) over every idle sample.
    let cur = f.last_output().rotations[0];
    let mut best = (f64::INFINITY, "", 0usize);
    for clip in lib.idles() {
        for (i, p) in clip.poses().iter().enumerate() {
            let d = 2.0 * libm::acos(cur.dot(p.rotations[0]).abs().min(1.0));
            if d < best.0 {
                best = (d, clip.id.as_str(), i);
            }
        }
    }
    let out = f.set_live(false, &lib).unwrap();
    assert_eq!(
        out,
        LiveOutcome::Exited {
            idle: best.1.into(),
            clock: best.2 as f64 * DT
        }
    );
    assert_eq!(best.1, "i1");
    assert_eq!(f.state(), &FsmState::Idle { idle: "i1".into() });
    let s = tick(&mut f, &lib);
    assert_eq!(s.live_weight, 0.5);
    let s = tick(&mut f, &lib);
    assert_eq!(s.live_weight, 0.0);
    assert_eq!(f.trigger_action("a2", &lib).unwrap(), TriggerOutcome::Accepted);
}

#[test]
fn graph_matches_declaration() {
    use StateLabel::*;
    let allowed: Vec<(StateLabel, StateLabel)> = StateLabel::ALL
        .iter()
        .flat_map(|a| StateLabel::ALL.iter().map(move |b| (*a, *b)))
        .filter(|(a, b)| a.may_become(*b))
        .collect();
    assert!(allowed.contains(&(Idle, TransitionIn)));
    assert!(allowed.contains(&(Acting, Live)));
    assert!(!allowed.contains(&(Idle, Acting)));
    assert!(!allowed.contains(&(Live, Live)));
    assert!(!allowed.contains(&(Live, Acting)));
    assert_eq!(allowed.len(), 9 + 5);
}

#[test]
fn rejects_bad_dt_and_foreign_clips() {
    let mut lib = library();
    let mut f = fsm(&lib);
    assert_eq!(f.tick(0.0, &lib, None).unwrap_err(), FsmError::BadDt(0.0));
    lib.insert(AnimationClip::action("x", "other", DT, ramp(0.0, 0.1, 3), "i0", "i0").unwrap())
        .unwrap();
    assert!(matches!(f.trigger_action("x", &lib), Err(FsmError::SkeletonMismatch { .. })));
}

#[test]
fn identical_scripts_give_identical_outputs() {
    let lib = library();
    let run = || {
        let mut f = live_fsm(&lib);
        let mut out = Vec::new();
        for k in 0..80 {
            match k {
                3 => drop(f.trigger_action("a1", &lib)),
                5 => drop(f.trigger_action("a2", &lib)),
                30 => drop(f.suspend(&lib)),
                40 => drop(f.set_live(true, &lib)),
                50 => drop(f.set_live(false, &lib)),
                _ => {}
            }
            let stream = pose(k as f64 * 0.01);
            out.push(f.tick(DT, &lib, Some(&stream)).unwrap());
        }
        out
    };
    assert_eq!(run(), run());
}
