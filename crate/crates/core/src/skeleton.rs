//! Joint hierarchies, poses, forward kinematics and pose blending.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{PoseError, SkeletonError};
use crate::math::{euler_to_quaternion, Axis, Quat, RotationOrder, Transform, Vec3};

/// Unit-norm tolerance applied to pose rotations.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// A BVH channel label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn parse(label: &str) -> Option<Channel> {
        Some(match label {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Channel::Xposition | Channel::Xrotation => Axis::X,
            Channel::Yposition | Channel::Yrotation => Axis::Y,
            Channel::Zposition | Channel::Zrotation => Axis::Z,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3,
    pub channels: Vec<Channel>,
    /// Offset of a trailing `End Site`, if the source declared one.
    pub end_site: Option<Vec3>,
}

impl Joint {
    pub fn new(name: impl Into<String>, parent: Option<usize>, offset: Vec3) -> Self {
        Joint {
            name: name.into(),
            parent,
            offset,
            channels: Vec::new(),
            end_site: None,
        }
    }

    /// The rotation order implied by this joint's rotation channels, when it
    /// declares exactly the three distinct axes.
    pub fn rotation_order(&self) -> Option<RotationOrder> {
        let axes: Vec<Axis> = self.channels.iter().filter(|c| c.is_rotation()).map(|c| c.axis()).collect();
        match axes.as_slice() {
            [a, b, c] => RotationOrder::from_axes([*a, *b, *c]),
            _ => None,
        }
    }
}

/// Topologically ordered joint hierarchy with a single root at index 0.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, SkeletonError> {
        let first = joints.first().ok_or(SkeletonError::Empty)?;
        if first.parent.is_some() {
            return Err(SkeletonError::RootNotFirst(first.name.clone()));
        }
        for (i, j) in joints.iter().enumerate() {
            match j.parent {
                None if i != 0 => return Err(SkeletonError::MultipleRoots(j.name.clone())),
                Some(p) if p >= i => {
                    return Err(SkeletonError::BadParent {
                        name: j.name.clone(),
                        index: i,
                        parent: p,
                    })
                }
                _ => {}
            }
            if !j.offset.is_finite() || j.end_site.is_some_and(|e| !e.is_finite()) {
                return Err(SkeletonError::NonFiniteOffset(j.name.clone()));
            }
            if joints[..i].iter().any(|o| o.name == j.name) {
                return Err(SkeletonError::DuplicateName(j.name.clone()));
            }
        }
        Ok(Skeleton { joints })
    }

    #[inline]
    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// Same skeleton with every offset multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Skeleton {
        let joints = self
            .joints
            .iter()
            .map(|j| Joint {
                offset: j.offset * scale,
                end_site: j.end_site.map(|e| e * scale),
                ..j.clone()
            })
            .collect();
        Skeleton { joints }
    }

    /// Appends a joint; the result is re-validated.
    pub fn with_joint(&self, joint: Joint) -> Result<Skeleton, SkeletonError> {
        let mut joints = self.joints.clone();
        joints.push(joint);
        Skeleton::new(joints)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub root_translation: Vec3,
    pub rotations: Vec<Quat>,
}

impl Pose {
    pub fn identity(joints: usize) -> Self {
        Pose {
            root_translation: Vec3::ZERO,
            rotations: alloc::vec![Quat::IDENTITY; joints],
        }
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn check(&self, joints: usize) -> Result<(), PoseError> {
        if self.rotations.len() != joints {
            return Err(PoseError::CountMismatch {
                expected: joints,
                got: self.rotations.len(),
            });
        }
        for (joint, q) in self.rotations.iter().enumerate() {
            if !q.is_unit(UNIT_TOLERANCE) {
                return Err(PoseError::NonUnit { joint, norm: q.norm() });
            }
        }
        Ok(())
    }

    /// Builds a pose from per-joint Euler triples (degrees) in each joint's
    /// declared order.
    pub fn from_euler(root: Vec3, angles: &[([f64; 3], RotationOrder)]) -> Pose {
        Pose {
            root_translation: root,
            rotations: angles.iter().map(|(a, o)| euler_to_quaternion(*a, *o)).collect(),
        }
    }
}

/// World transform of every joint, in joint order.
///
/// The root sits at `offset_root + root_translation` rotated by its own
/// rotation; every other joint is `world(parent) · translate(offset) · rotate(q)`.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &Pose) -> Result<Vec<Transform>, PoseError> {
    pose.check(skeleton.len())?;
    let mut world: Vec<Transform> = Vec::with_capacity(skeleton.len());
    for (joint, q) in skeleton.joints.iter().zip(&pose.rotations) {
        let t = match joint.parent {
            None => Transform::new(*q, joint.offset + pose.root_translation),
            Some(p) => world[p].then(&Transform::new(*q, joint.offset)),
        };
        world.push(t);
    }
    Ok(world)
}

/// Linear translation blend plus shortest-arc slerp per joint.
///
/// `w = 0` and `w = 1` return exact copies of the endpoints.
pub fn lerp_pose(a: &Pose, b: &Pose, w: f64) -> Result<Pose, PoseError> {
    if a.rotations.len() != b.rotations.len() {
        return Err(PoseError::CountMismatch {
            expected: a.rotations.len(),
            got: b.rotations.len(),
        });
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(PoseError::WeightOutOfRange(w));
    }
    if w == 0.0 {
        return Ok(a.clone());
    }
    if w == 1.0 {
        return Ok(b.clone());
    }
    Ok(Pose {
        root_translation: a.root_translation.lerp(b.root_translation, w),
        rotations: a.rotations.iter().zip(&b.rotations).map(|(qa, qb)| qa.slerp(*qb, w)).collect(),
    })
}

/// Root-translation distance plus the summed per-joint geodesic angle.
pub fn pose_distance(a: &Pose, b: &Pose) -> Result<f64, PoseError> {
    if a.rotations.len() != b.rotations.len() {
        return Err(PoseError::CountMismatch {
            expected: a.rotations.len(),
            got: b.rotations.len(),
        });
    }
    let rot: f64 = a.rotations.iter().zip(&b.rotations).map(|(qa, qb)| qa.angle_to(*qb)).sum();
    Ok(a.root_translation.distance(b.root_translation) + rot)
}
