//! Rigid-body algebra and remote-center-of-motion arm kinematics.
//!
//! Both arm kinds share the chain
//! `base ∘ Ry(yaw) ∘ Rx(pitch) ∘ Tz(insertion) ∘ Rz(roll) [∘ Rx(wrist pitch) ∘ Ry(wrist yaw)] ∘ tool_offset`
//! with the remote center at the base origin. Everything here is a pure
//! function on values.

mod arm;
mod camera;
mod ik;
mod registration;
mod transform;

pub use arm::{fk, ArmKind, ArmModel, Forward, JointLimit, JointVector, INSERTION};
pub use camera::{project, CameraModel, Projection};
pub use ik::{diff_ik, IkParams, IkSolution};
pub use registration::{register_base, PointPair, Registration};
pub use transform::{compose, RigidTransform, UnitQuat, Vec3};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("expected {expected} joints, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("invalid joint limits for joint {0}")]
    InvalidLimits(usize),
    #[error("tolerance must be positive")]
    InvalidTolerance,
    #[error("target unreachable: requires insertion {required_insertion:.4} m")]
    Unreachable { required_insertion: f64 },
    #[error("ik did not converge (position {position_error:.3e} m, rotation {rotation_error:.3e} rad)")]
    NotConverged {
        position_error: f64,
        rotation_error: f64,
        best: JointVector,
    },
    #[error("registration needs at least 3 point pairs, got {0}")]
    TooFewPairs(usize),
    #[error("registration points are collinear or coincident")]
    DegenerateConfiguration,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("invalid camera model")]
    InvalidCamera,
}
