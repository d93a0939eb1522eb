//! Animation, blending and planar-shadow core of a virtual shadow theater.
//!
//! Flat silhouette avatars are driven by skeletal poses, blended through a
//! two-bus state machine and composed into a castelet scene whose shadows are
//! projected analytically onto screen planes. The crate is `no_std` and only
//! needs `alloc`; file formats, networking and the engine loop live in the
//! `castelet` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clips;
pub mod error;
pub mod fsm;
pub mod math;
pub mod retarget;
pub mod scene;
pub mod skeleton;
pub mod skin;

pub use clips::{
    reassemble, sample_clip, sample_palindrome, split_take, validate_chain, AnimationClip, ClipKind, ClipLibrary,
    Take,
};
pub use error::{BindError, ClipError, ConfigError, FsmError, MeshError, PoseError, SceneError, SkeletonError};
pub use fsm::{FsmSnapshot, FsmState, OavFsm, StateLabel, TriggerOutcome};
pub use math::{euler_to_quaternion, quaternion_to_euler, Quat, RotationOrder, Transform, Vec3};
pub use retarget::{bind_map, retarget_pose, BoundRetarget, RetargetEntry, RetargetMap};
pub use scene::{compose_frame, project_shadow_point, CasteletScene, RenderFrame};
pub use skeleton::{forward_kinematics, lerp_pose, pose_distance, Channel, Joint, Pose, Skeleton};
pub use skin::{skin_silhouette, BoundMesh, SilhouetteMesh};
