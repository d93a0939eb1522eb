use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown rotation order `{0}`")]
    UnknownRotationOrder(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("joint 0 (`{0}`) must be the root")]
    RootNotFirst(String),
    #[error("joint `{name}` at index {index} has parent {parent} which is not an earlier joint")]
    BadParent {
        name: String,
        index: usize,
        parent: usize,
    },
    #[error("joint `{0}` is a second root")]
    MultipleRoots(String),
    #[error("duplicate joint name `{0}`")]
    DuplicateName(String),
    #[error("joint `{0}` has a non-finite offset")]
    NonFiniteOffset(String),
}

/// Violations of the pose/skeleton agreement contract.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("pose has {got} rotations, skeleton has {expected} joints")]
    CountMismatch { expected: usize, got: usize },
    #[error("rotation of joint {joint} is not unit length (norm {norm})")]
    NonUnit { joint: usize, norm: f64 },
    #[error("blend weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("vertex {vertex} has no skin weights")]
    Unweighted { vertex: usize },
    #[error("vertex {vertex} has a negative weight {weight}")]
    NegativeWeight { vertex: usize, weight: f64 },
    #[error("weights of vertex {vertex} sum to {sum}, expected 1")]
    WeightSum { vertex: usize, sum: f64 },
    #[error("weight/vertex count mismatch: {vertices} vertices, {weights} weight lists")]
    WeightCount { vertices: usize, weights: usize },
    #[error("polygon {polygon} references vertex {vertex}, mesh has {count}")]
    BadPolygonIndex {
        polygon: usize,
        vertex: usize,
        count: usize,
    },
    #[error("mesh needs an outline polygon with at least 3 vertices")]
    NoOutline,
    #[error("vertex {vertex} references joint {joint}, skeleton has {joints}")]
    BadJoint {
        vertex: usize,
        joint: usize,
        joints: usize,
    },
    #[error("mesh bound to {expected} joints, got {got} transforms")]
    TransformCount { expected: usize, got: usize },
    #[error("non-finite vertex {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error("unknown {side} joint `{name}`")]
    UnknownJoint { side: &'static str, name: String },
    #[error("target joint `{0}` mapped twice")]
    DuplicateTarget(String),
    #[error("rotation offset for `{0}` is not a unit quaternion")]
    NonUnitOffset(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClipError {
    #[error("frame time must be positive, got {0}")]
    BadFrameTime(f64),
    #[error("clip `{0}` needs at least two samples")]
    TooShort(String),
    #[error("take is empty")]
    EmptyTake,
    #[error("cut times t1={t1} t2={t2} outside (0, {duration}) or not increasing")]
    CutOutOfRange { t1: f64, t2: f64, duration: f64 },
    #[error("segment {segment} would hold fewer than 2 samples")]
    SegmentTooShort { segment: usize },
    #[error("idle clip `{0}` cannot carry idle references")]
    IdleWithReferences(String),
    #[error("clip `{0}` is not an idle clip")]
    NotIdle(String),
    #[error("clip `{0}` is not an action clip")]
    NotAction(String),
    #[error("unknown clip `{0}`")]
    UnknownClip(String),
    #[error("duplicate clip id `{0}`")]
    DuplicateClip(String),
    #[error("clips disagree on frame time or skeleton")]
    Incompatible,
    #[error(transparent)]
    Pose(#[from] PoseError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FsmError {
    #[error(transparent)]
    Clip(#[from] ClipError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error("clip `{clip}` animates skeleton `{clip_skeleton}`, avatar uses `{avatar_skeleton}`")]
    SkeletonMismatch {
        clip: String,
        clip_skeleton: String,
        avatar_skeleton: String,
    },
    #[error("no live retarget binding configured")]
    NoLiveBinding,
    #[error("tick duration must be positive, got {0}")]
    BadDt(f64),
    #[error("library holds no idle clip for skeleton `{0}`")]
    NoIdle(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("screen `{0}` normal is not unit length")]
    NonUnitNormal(String),
    #[error("screen `{0}` bounds must be a convex polygon of at least 3 points on its plane")]
    BadBounds(String),
    #[error("translucency {0} outside [0, 1]")]
    BadTranslucency(f64),
    #[error("oav `{0}` tint components must lie in [0, 1]")]
    BadColor(String),
    #[error("camera look and up are parallel or degenerate")]
    DegenerateCamera,
    #[error("camera field of view {0} outside (0, π)")]
    BadFov(f64),
    #[error("camera view height / viewport must be positive")]
    BadViewport,
    #[error("expected {expected} poses, got {got}")]
    MissingPose { expected: usize, got: usize },
    #[error("unknown {kind} `{name}`")]
    UnknownTarget { kind: &'static str, name: String },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
