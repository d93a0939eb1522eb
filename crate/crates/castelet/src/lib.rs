//! Show engine around `castelet-core`: BVH files, the mocap wire protocol,
//! show bundles, the tick loop, session logs and the network services.

pub mod bvh;
pub mod control;
pub mod engine;
pub mod log;
pub mod mailbox;
pub mod mocap;
pub mod session;
pub mod show;
pub mod svg;
pub mod stream;
