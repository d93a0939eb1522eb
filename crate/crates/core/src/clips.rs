//! Takes, clips, the clip library and idle playback.
//!
//! Takes and clips are uniformly sampled: sample `i` sits at
//! `i · frame_time`. Splitting a take therefore only moves indices around and
//! reassembly is exact.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{ClipError, PoseError};
use crate::math::rem_euclid;
use crate::skeleton::{lerp_pose, pose_distance, Pose, Skeleton};

/// Default tolerance for idle/action boundary agreement, in pose-distance units.
pub const DEFAULT_CHAIN_TOLERANCE: f64 = 0.05;

const KNOT_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Take {
    pub id: String,
    pub skeleton_ref: String,
    frame_time: f64,
    poses: Vec<Pose>,
}

impl Take {
    pub fn new(
        id: impl Into<String>,
        skeleton_ref: impl Into<String>,
        frame_time: f64,
        poses: Vec<Pose>,
    ) -> Result<Self, ClipError> {
        if !(frame_time > 0.0 && frame_time.is_finite()) {
            return Err(ClipError::BadFrameTime(frame_time));
        }
        if poses.is_empty() {
            return Err(ClipError::EmptyTake);
        }
        Ok(Take {
            id: id.into(),
            skeleton_ref: skeleton_ref.into(),
            frame_time,
            poses,
        })
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.poses.len() - 1) as f64 * self.frame_time
    }

    /// `(timestamp, pose)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &Pose)> + '_ {
        self.poses.iter().enumerate().map(|(i, p)| (i as f64 * self.frame_time, p))
    }

    pub fn check_against(&self, skeleton: &Skeleton) -> Result<(), PoseError> {
        self.poses.iter().try_for_each(|p| p.check(skeleton.len()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ClipKind {
    Idle,
    Action { start_idle: String, end_idle: String },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AnimationClip {
    pub id: String,
    pub kind: ClipKind,
    pub skeleton_ref: String,
    frame_time: f64,
    poses: Vec<Pose>,
}

impl AnimationClip {
    pub fn new(
        id: impl Into<String>,
        kind: ClipKind,
        skeleton_ref: impl Into<String>,
        frame_time: f64,
        poses: Vec<Pose>,
    ) -> Result<Self, ClipError> {
        let id = id.into();
        if !(frame_time > 0.0 && frame_time.is_finite()) {
            return Err(ClipError::BadFrameTime(frame_time));
        }
        if poses.len() < 2 {
            return Err(ClipError::TooShort(id));
        }
        Ok(AnimationClip {
            id,
            kind,
            skeleton_ref: skeleton_ref.into(),
            frame_time,
            poses,
        })
    }

    pub fn idle(id: impl Into<String>, skeleton_ref: impl Into<String>, frame_time: f64, poses: Vec<Pose>) -> Result<Self, ClipError> {
        AnimationClip::new(id, ClipKind::Idle, skeleton_ref, frame_time, poses)
    }

    pub fn action(
        id: impl Into<String>,
        skeleton_ref: impl Into<String>,
        frame_time: f64,
        poses: Vec<Pose>,
        start_idle: impl Into<String>,
        end_idle: impl Into<String>,
    ) -> Result<Self, ClipError> {
        let kind = ClipKind::Action {
            start_idle: start_idle.into(),
            end_idle: end_idle.into(),
        };
        AnimationClip::new(id, kind, skeleton_ref, frame_time, poses)
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn first(&self) -> &Pose {
        &self.poses[0]
    }

    pub fn last(&self) -> &Pose {
        &self.poses[self.poses.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        (self.poses.len() - 1) as f64 * self.frame_time
    }

    pub fn is_idle(&self) -> bool {
        self.kind == ClipKind::Idle
    }

    /// `(start_idle, end_idle)` for actions.
    pub fn idles(&self) -> Option<(&str, &str)> {
        match &self.kind {
            ClipKind::Action { start_idle, end_idle } => Some((start_idle, end_idle)),
            ClipKind::Idle => None,
        }
    }
}

/// Snaps `t1`/`t2` to the nearest sample indices of a uniformly sampled
/// sequence of `len` samples, enforcing at least two samples per segment.
pub fn cut_indices(len: usize, frame_time: f64, t1: f64, t2: f64) -> Result<(usize, usize), ClipError> {
    let duration = len.saturating_sub(1) as f64 * frame_time;
    if !(t1 > 0.0 && t1 < t2 && t2 < duration) {
        return Err(ClipError::CutOutOfRange { t1, t2, duration });
    }
    let c1 = libm::round(t1 / frame_time) as usize;
    let c2 = libm::round(t2 / frame_time) as usize;
    if c1 < 1 {
        return Err(ClipError::SegmentTooShort { segment: 0 });
    }
    if c2 <= c1 {
        return Err(ClipError::SegmentTooShort { segment: 1 });
    }
    if c2 + 1 >= len {
        return Err(ClipError::SegmentTooShort { segment: 2 });
    }
    Ok((c1, c2))
}

/// Cuts a take into starting idle, action and ending idle.
///
/// Cut points land on the nearest sample and that sample is shared by both
/// neighbouring clips. Each product starts at time 0.
pub fn split_take(
    take: &Take,
    t1: f64,
    t2: f64,
    ids: [&str; 3],
) -> Result<(AnimationClip, AnimationClip, AnimationClip), ClipError> {
    let (c1, c2) = cut_indices(take.len(), take.frame_time, t1, t2)?;
    let [start, action, end] = ids;
    let ft = take.frame_time;
    let sk = take.skeleton_ref.as_str();
    Ok((
        AnimationClip::idle(start, sk, ft, take.poses[..=c1].to_vec())?,
        AnimationClip::action(action, sk, ft, take.poses[c1..=c2].to_vec(), start, end)?,
        AnimationClip::idle(end, sk, ft, take.poses[c2..].to_vec())?,
    ))
}

/// Concatenates clips, dropping each shared boundary sample once.
pub fn reassemble(id: impl Into<String>, clips: &[&AnimationClip]) -> Result<Take, ClipError> {
    let first = clips.first().ok_or(ClipError::EmptyTake)?;
    if clips
        .iter()
        .any(|c| c.frame_time != first.frame_time || c.skeleton_ref != first.skeleton_ref)
    {
        return Err(ClipError::Incompatible);
    }
    let mut poses = first.poses.clone();
    for c in &clips[1..] {
        poses.extend_from_slice(&c.poses[1..]);
    }
    Take::new(id, first.skeleton_ref.clone(), first.frame_time, poses)
}

/// Clamped linear sampling between bracketing samples.
pub fn sample_clip(clip: &AnimationClip, t: f64) -> Pose {
    let last = clip.poses.len() - 1;
    let x = if t.is_nan() { 0.0 } else { t.max(0.0) / clip.frame_time };
    if x >= last as f64 {
        return clip.poses[last].clone();
    }
    let k = libm::round(x);
    if (x - k).abs() < KNOT_SNAP {
        return clip.poses[k as usize].clone();
    }
    let i = libm::floor(x) as usize;
    lerp_pose(&clip.poses[i], &clip.poses[i + 1], x - i as f64).expect("clip poses share one skeleton")
}

/// Reflects `t` into `[0, duration]` with period `2·duration`.
pub fn palindrome_time(duration: f64, t: f64) -> f64 {
    let period = 2.0 * duration;
    let u = rem_euclid(t, period);
    if u <= duration {
        u
    } else {
        period - u
    }
}

/// Forward-then-reverse playback of an idle clip.
pub fn sample_palindrome(clip: &AnimationClip, t: f64) -> Result<Pose, ClipError> {
    if !clip.is_idle() {
        return Err(ClipError::NotIdle(clip.id.clone()));
    }
    Ok(sample_clip(clip, palindrome_time(clip.duration(), t)))
}

/// How an idle channel turns an ever-increasing clock into a pose.
pub trait IdleSampler: Send + Sync + core::fmt::Debug {
    fn sample(&self, clip: &AnimationClip, t: f64) -> Pose;
}

/// Ping-pong playback; continuous at the turnarounds.
#[derive(Clone, Copy, Debug, Default)]
pub struct Palindrome;

impl IdleSampler for Palindrome {
    fn sample(&self, clip: &AnimationClip, t: f64) -> Pose {
        sample_clip(clip, palindrome_time(clip.duration(), t))
    }
}

/// Naive wrap-around looping. Jumps from the last pose to the first.
#[derive(Clone, Copy, Debug, Default)]
pub struct WrapLoop;

impl IdleSampler for WrapLoop {
    fn sample(&self, clip: &AnimationClip, t: f64) -> Pose {
        let d = clip.duration();
        let n = (clip.poses.len() - 1) as f64;
        // Snap to the knot grid before wrapping so `t = k·d` lands on sample 0.
        let x = t.max(0.0) / clip.frame_time;
        let k = libm::round(x);
        let x = if (x - k).abs() < KNOT_SNAP { k } else { x };
        let u = rem_euclid(x, n) * clip.frame_time;
        sample_clip(clip, u.min(d))
    }
}

pub fn default_sampler() -> Arc<dyn IdleSampler> {
    Arc::new(Palindrome)
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySide {
    /// `action.first` against `start_idle.last`.
    Start,
    /// `action.last` against `end_idle.first`.
    End,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LibraryIssue {
    UnresolvedIdle { action: String, idle: String },
    ReferenceNotIdle { action: String, clip: String },
    Boundary { action: String, idle: String, side: BoundarySide, distance: f64 },
    Incompatible { action: String, idle: String },
}

#[derive(Clone, Debug, Default)]
pub struct ClipLibrary {
    clips: BTreeMap<String, AnimationClip>,
}

impl ClipLibrary {
    pub fn new() -> Self {
        ClipLibrary::default()
    }

    pub fn insert(&mut self, clip: AnimationClip) -> Result<(), ClipError> {
        if self.clips.contains_key(&clip.id) {
            return Err(ClipError::DuplicateClip(clip.id));
        }
        self.clips.insert(clip.id.clone(), clip);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&AnimationClip, ClipError> {
        self.clips.get(id).ok_or_else(|| ClipError::UnknownClip(id.into()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.clips.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Clips in id order.
    pub fn iter(&self) -> impl Iterator<Item = &AnimationClip> {
        self.clips.values()
    }

    pub fn idles(&self) -> impl Iterator<Item = &AnimationClip> {
        self.clips.values().filter(|c| c.is_idle())
    }

    fn boundary_issues(&self, action: &AnimationClip, tolerance: f64, out: &mut Vec<LibraryIssue>) {
        let Some((start, end)) = action.idles() else { return };
        for (idle_id, side) in [(start, BoundarySide::Start), (end, BoundarySide::End)] {
            let Some(idle) = self.clips.get(idle_id) else {
                out.push(LibraryIssue::UnresolvedIdle {
                    action: action.id.clone(),
                    idle: idle_id.into(),
                });
                continue;
            };
            if !idle.is_idle() {
                out.push(LibraryIssue::ReferenceNotIdle {
                    action: action.id.clone(),
                    clip: idle_id.into(),
                });
                continue;
            }
            let (a, b) = match side {
                BoundarySide::Start => (action.first(), idle.last()),
                BoundarySide::End => (action.last(), idle.first()),
            };
            match pose_distance(a, b) {
                Ok(distance) if distance > tolerance => out.push(LibraryIssue::Boundary {
                    action: action.id.clone(),
                    idle: idle_id.into(),
                    side,
                    distance,
                }),
                Ok(_) => {}
                Err(_) => out.push(LibraryIssue::Incompatible {
                    action: action.id.clone(),
                    idle: idle_id.into(),
                }),
            }
        }
    }

    /// Every idle reference resolves and every action boundary matches its idle.
    pub fn validate(&self, tolerance: f64) -> Vec<LibraryIssue> {
        let mut out = Vec::new();
        for clip in self.clips.values() {
            self.boundary_issues(clip, tolerance, &mut out);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChainViolation {
    IdleMismatch {
        from: String,
        to: String,
        end_idle: String,
        start_idle: String,
    },
    Library(LibraryIssue),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainReport {
    pub violations: Vec<ChainViolation>,
}

impl ChainReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that a sequence of actions can play back to back.
pub fn validate_chain(library: &ClipLibrary, sequence: &[&str], tolerance: f64) -> Result<ChainReport, ClipError> {
    let actions = sequence
        .iter()
        .map(|id| {
            let c = library.get(id)?;
            c.idles().map(|_| c).ok_or_else(|| ClipError::NotAction((*id).into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = ChainReport::default();
    let mut issues = Vec::new();
    for a in &actions {
        library.boundary_issues(a, tolerance, &mut issues);
    }
    report.violations.extend(issues.into_iter().map(ChainViolation::Library));
    for pair in actions.windows(2) {
        let (_, end) = pair[0].idles().expect("filtered to actions");
        let (start, _) = pair[1].idles().expect("filtered to actions");
        if end != start {
            report.violations.push(ChainViolation::IdleMismatch {
                from: pair[0].id.clone(),
                to: pair[1].id.clone(),
                end_idle: end.into(),
                start_idle: start.into(),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quat, Vec3};
    use alloc::vec;

    fn ramp_pose(angle: f64) -> Pose {
        Pose {
            root_translation: Vec3::new(angle, 0.0, 0.0),
            rotations: vec![Quat::from_axis_angle(Vec3::Y, angle)],
        }
    }

    fn ramp_take(n: usize, ft: f64) -> Take {
        Take::new("t", "sk", ft, (0..n).map(|i| ramp_pose(i as f64 * 0.01)).collect()).unwrap()
    }

    #[test]
    fn split_durations_and_reassembly() {
        let take = ramp_take(601, 1.0 / 60.0);
        assert!((take.duration() - 10.0).abs() < 1e-12);
        let (a, b, c) = split_take(&take, 2.0, 7.0, ["i0", "act", "i1"]).unwrap();
        assert!((a.duration() - 2.0).abs() < 1e-9);
        assert!((b.duration() - 5.0).abs() < 1e-9);
        assert!((c.duration() - 3.0).abs() < 1e-9);
        assert_eq!(b.idles(), Some(("i0", "i1")));
        assert_eq!(a.last(), b.first());
        assert_eq!(b.last(), c.first());
        let back = reassemble("t", &[&a, &b, &c]).unwrap();
        assert_eq!(back, take);
    }

    #[test]
    fn split_rejects_bad_cuts() {
        let take = ramp_take(11, 0.1);
        assert!(matches!(split_take(&take, 0.0, 0.5, ["a", "b", "c"]), Err(ClipError::CutOutOfRange { .. })));
        assert!(matches!(split_take(&take, 0.5, 0.5, ["a", "b", "c"]), Err(ClipError::CutOutOfRange { .. })));
        assert!(matches!(split_take(&take, 0.5, 1.0, ["a", "b", "c"]), Err(ClipError::CutOutOfRange { .. })));
        assert!(matches!(split_take(&take, 0.02, 0.5, ["a", "b", "c"]), Err(ClipError::SegmentTooShort { segment: 0 })));
        assert!(matches!(split_take(&take, 0.5, 0.52, ["a", "b", "c"]), Err(ClipError::SegmentTooShort { segment: 1 })));
        assert!(matches!(split_take(&take, 0.5, 0.97, ["a", "b", "c"]), Err(ClipError::SegmentTooShort { segment: 2 })));
    }

    #[test]
    fn sampling_endpoints_knots_midpoints() {
        let take = ramp_take(5, 0.5);
        let clip = AnimationClip::idle("i", "sk", 0.5, take.poses().to_vec()).unwrap();
        assert_eq!(sample_clip(&clip, 0.0), take.poses()[0]);
        assert_eq!(sample_clip(&clip, 2.0), take.poses()[4]);
        assert_eq!(sample_clip(&clip, 99.0), take.poses()[4]);
        assert_eq!(sample_clip(&clip, 1.5), take.poses()[3]);
        let mid = sample_clip(&clip, 1.25);
        let expect = lerp_pose(&take.poses()[2], &take.poses()[3], 0.5).unwrap();
        assert!(pose_distance(&mid, &expect).unwrap() < 1e-12);
    }

    #[test]
    fn palindrome_reflection() {
        assert_eq!(palindrome_time(2.0, 2.5), 1.5);
        assert_eq!(palindrome_time(2.0, 4.0), 0.0);
        assert_eq!(palindrome_time(2.0, 1.0), 1.0);
        let clip = AnimationClip::idle("i", "sk", 0.5, ramp_take(5, 0.5).poses().to_vec()).unwrap();
        assert_eq!(sample_palindrome(&clip, 0.0).unwrap(), sample_palindrome(&clip, 4.0).unwrap());
        let act = AnimationClip::action("a", "sk", 0.5, ramp_take(5, 0.5).poses().to_vec(), "i", "i").unwrap();
        assert_eq!(sample_palindrome(&act, 0.0), Err(ClipError::NotIdle("a".into())));
    }

    #[test]
    fn too_short_clips_rejected() {
        assert!(matches!(AnimationClip::idle("x", "sk", 0.1, vec![ramp_pose(0.0)]), Err(ClipError::TooShort(_))));
        assert!(matches!(Take::new("x", "sk", 0.0, vec![ramp_pose(0.0)]), Err(ClipError::BadFrameTime(_))));
    }

    fn chained_library() -> ClipLibrary {
        let take = ramp_take(31, 0.1);
        let (i0, a1, i1) = split_take(&take, 1.0, 2.0, ["i0", "a1", "i1"]).unwrap();
        let mut lib = ClipLibrary::new();
        lib.insert(i0).unwrap();
        lib.insert(a1).unwrap();
        lib.insert(i1.clone()).unwrap();
        let back: Vec<Pose> = i1.poses().iter().rev().cloned().collect();
        let a2 = AnimationClip::action("a2", "sk", 0.1, back, "i1", "i1").unwrap();
        lib.insert(a2).unwrap();
        lib
    }

    #[test]
    fn chain_validation() {
        let lib = chained_library();
        assert!(lib.validate(DEFAULT_CHAIN_TOLERANCE).is_empty());
        assert!(validate_chain(&lib, &["a1"], 0.05).unwrap().is_valid());
        // a2 starts at i1.last and ends at i1.first: both match.
        let r = validate_chain(&lib, &["a1", "a2"], 0.05).unwrap();
        assert!(r.is_valid(), "{r:?}");
        let r = validate_chain(&lib, &["a2", "a1"], 0.05).unwrap();
        assert_eq!(
            r.violations,
            vec![ChainViolation::IdleMismatch {
                from: "a2".into(),
                to: "a1".into(),
                end_idle: "i1".into(),
                start_idle: "i0".into()
            }]
        );
        assert_eq!(validate_chain(&lib, &["nope"], 0.05), Err(ClipError::UnknownClip("nope".into())));
        assert_eq!(validate_chain(&lib, &["i0"], 0.05), Err(ClipError::NotAction("i0".into())));
    }

    #[test]
    fn library_reports_boundaries_and_dangling_refs() {
        let mut lib = chained_library();
        let far: Vec<Pose> = (0..3).map(|_| ramp_pose(3.0)).collect();
        lib.insert(AnimationClip::action("bad", "sk", 0.1, far, "i0", "ghost").unwrap()).unwrap();
        let issues = lib.validate(0.05);
        assert!(issues.iter().any(|i| matches!(i, LibraryIssue::UnresolvedIdle { idle, .. } if idle == "ghost")));
        assert!(issues
            .iter()
            .any(|i| matches!(i, LibraryIssue::Boundary { action, side: BoundarySide::Start, .. } if action == "bad")));
        assert_eq!(issues.len(), 2);
        assert!(lib.insert(AnimationClip::idle("i0", "sk", 0.1, vec![ramp_pose(0.0); 2]).unwrap()).is_err());
    }
}
