//! Rotation-copy retargeting from a mocap skeleton onto a silhouette rig.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{BindError, PoseError};
use crate::math::Quat;
use crate::skeleton::{Pose, Skeleton, UNIT_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetargetEntry {
    pub source_joint: String,
    pub target_joint: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rotation_offset: Quat,
}

impl RetargetEntry {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        RetargetEntry {
            source_joint: source.into(),
            target_joint: target.into(),
            rotation_offset: Quat::IDENTITY,
        }
    }

    pub fn with_offset(mut self, offset: Quat) -> Self {
        self.rotation_offset = offset;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetargetMap {
    pub entries: Vec<RetargetEntry>,
    #[cfg_attr(feature = "serde", serde(default = "unit_scale"))]
    pub root_translation_scale: f64,
}

#[cfg(feature = "serde")]
fn unit_scale() -> f64 {
    1.0
}

impl Default for RetargetMap {
    fn default() -> Self {
        RetargetMap {
            entries: Vec::new(),
            root_translation_scale: 1.0,
        }
    }
}

impl RetargetMap {
    /// One identity entry per joint name shared by both skeletons, in target order.
    pub fn by_shared_names(source: &Skeleton, target: &Skeleton) -> Self {
        RetargetMap {
            entries: target
                .joints()
                .iter()
                .filter(|j| source.index_of(&j.name).is_some())
                .map(|j| RetargetEntry::new(j.name.clone(), j.name.clone()))
                .collect(),
            root_translation_scale: 1.0,
        }
    }
}

/// Joints left out of a binding, by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BindReport {
    /// Held at their rest rotation.
    pub unmapped_target: Vec<String>,
    /// Ignored.
    pub unmapped_source: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRetarget {
    pairs: Vec<(usize, usize, Quat)>,
    source_len: usize,
    target_len: usize,
    root_translation_scale: f64,
    report: BindReport,
}

impl BoundRetarget {
    pub fn report(&self) -> &BindReport {
        &self.report
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    /// `(source index, target index)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(s, t, _)| (s, t))
    }
}

pub fn bind_map(map: &RetargetMap, source: &Skeleton, target: &Skeleton) -> Result<BoundRetarget, BindError> {
    let mut pairs = Vec::with_capacity(map.entries.len());
    let mut target_used = alloc::vec![false; target.len()];
    let mut source_used = alloc::vec![false; source.len()];
    for e in &map.entries {
        let s = source.index_of(&e.source_joint).ok_or_else(|| BindError::UnknownJoint {
            side: "source",
            name: e.source_joint.clone(),
        })?;
        let t = target.index_of(&e.target_joint).ok_or_else(|| BindError::UnknownJoint {
            side: "target",
            name: e.target_joint.clone(),
        })?;
        if target_used[t] {
            return Err(BindError::DuplicateTarget(e.target_joint.clone()));
        }
        if !e.rotation_offset.is_unit(UNIT_TOLERANCE) {
            return Err(BindError::NonUnitOffset(e.target_joint.clone()));
        }
        target_used[t] = true;
        source_used[s] = true;
        pairs.push((s, t, e.rotation_offset));
    }
    let names = |sk: &Skeleton, used: &[bool]| {
        sk.joints()
            .iter()
            .zip(used)
            .filter(|(_, u)| !**u)
            .map(|(j, _)| j.name.clone())
            .collect::<Vec<_>>()
    };
    Ok(BoundRetarget {
        report: BindReport {
            unmapped_target: names(target, &target_used),
            unmapped_source: names(source, &source_used),
        },
        pairs,
        source_len: source.len(),
        target_len: target.len(),
        root_translation_scale: map.root_translation_scale,
    })
}

/// `target_rot = offset · source_rot` for mapped joints, identity elsewhere.
pub fn retarget_pose(bound: &BoundRetarget, source: &Pose) -> Result<Pose, PoseError> {
    if source.rotations.len() != bound.source_len {
        return Err(PoseError::CountMismatch {
            expected: bound.source_len,
            got: source.rotations.len(),
        });
    }
    let mut out = Pose::identity(bound.target_len);
    out.root_translation = source.root_translation * bound.root_translation_scale;
    for &(s, t, offset) in &bound.pairs {
        out.rotations[t] = (offset * source.rotations[s]).normalized();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::skeleton::Joint;
    use alloc::vec;

    fn skel(names: &[&str]) -> Skeleton {
        Skeleton::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| Joint::new(*n, i.checked_sub(1), Vec3::Y))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_map_holds_everything_at_rest() {
        let src = skel(&["Hips", "Spine"]);
        let tgt = skel(&["root", "torso", "head"]);
        let b = bind_map(&RetargetMap::default(), &src, &tgt).unwrap();
        assert_eq!(b.report().unmapped_target, vec!["root", "torso", "head"]);
        assert_eq!(b.report().unmapped_source, vec!["Hips", "Spine"]);
        let mut p = Pose::identity(2);
        p.rotations[1] = Quat::from_axis_angle(Vec3::X, 0.4);
        assert_eq!(retarget_pose(&b, &p).unwrap(), Pose::identity(3));
    }

    #[test]
    fn identity_map_is_bijection() {
        let s = skel(&["a", "b", "c"]);
        let b = bind_map(&RetargetMap::by_shared_names(&s, &s), &s, &s).unwrap();
        assert_eq!(b.pairs().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(b.report().unmapped_target.is_empty());
        let mut p = Pose::identity(3);
        p.root_translation = Vec3::new(1.0, 2.0, 3.0);
        p.rotations[2] = Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.9);
        let out = retarget_pose(&b, &p).unwrap();
        assert_eq!(out.root_translation, p.root_translation);
        for (a, b) in out.rotations.iter().zip(&p.rotations) {
            assert!(a.angle_to(*b) < 1e-12);
        }
    }

    #[test]
    fn misspelled_joint_is_named() {
        let s = skel(&["Hips", "Spine"]);
        let map = RetargetMap {
            entries: vec![RetargetEntry::new("Spien", "Spine")],
            root_translation_scale: 1.0,
        };
        assert_eq!(
            bind_map(&map, &s, &s),
            Err(BindError::UnknownJoint {
                side: "source",
                name: "Spien".into()
            })
        );
        let dup = RetargetMap {
            entries: vec![RetargetEntry::new("Hips", "Spine"), RetargetEntry::new("Spine", "Spine")],
            root_translation_scale: 1.0,
        };
        assert_eq!(bind_map(&dup, &s, &s), Err(BindError::DuplicateTarget("Spine".into())));
    }

    #[test]
    fn offset_composes_about_same_axis() {
        let s = skel(&["a"]);
        let map = RetargetMap {
            entries: vec![RetargetEntry::new("a", "a").with_offset(Quat::from_axis_angle(Vec3::Z, 90f64.to_radians()))],
            root_translation_scale: 0.5,
        };
        let b = bind_map(&map, &s, &s).unwrap();
        let mut p = Pose::identity(1);
        p.rotations[0] = Quat::from_axis_angle(Vec3::Z, 30f64.to_radians());
        p.root_translation = Vec3::new(2.0, 0.0, 0.0);
        let out = retarget_pose(&b, &p).unwrap();
        assert!(out.rotations[0].angle_to(Quat::from_axis_angle(Vec3::Z, 120f64.to_radians())) < 1e-12);
        assert_eq!(out.root_translation, Vec3::new(1.0, 0.0, 0.0));
        assert!(retarget_pose(&b, &Pose::identity(2)).is_err());
    }
}
