//! Stereo multi-modal 6DoF tracking of fast-moving rigid objects.
//!
//! Each frame runs three stages:
//!
//! 1. [`center`]: track features in both eyes, cluster them by motion
//!    consistency and triangulate the object center.
//! 2. [`pose_queue`]: blend the recent orientation history into a pivot
//!    rotation.
//! 3. [`ray_filter`]: sample pose hypotheses along the camera ray through the
//!    center, score them against the observed features, keep the best and
//!    refine it.
//!
//! [`sim`] generates synthetic stereo sequences with exact ground truth,
//! [`eval`] scores traces, and [`pipeline`] ties everything into the
//! `generate`/`track`/`eval`/`ablate`/`bench` commands.

pub mod center;
pub mod error;
pub mod eval;
pub mod geom;
pub mod object;
pub mod pipeline;
pub mod pose_queue;
pub mod ray_filter;
pub mod sim;
pub mod vision;

pub use error::{Error, Result};
pub use geom::{CameraIntrinsics, EulerAngles, Eye, Pose, Rotation, StereoRig, Vec3};
pub use object::ObjectModel;
