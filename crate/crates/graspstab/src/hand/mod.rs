//! The 16-ellipsoid articulated hand: template, shape/pose parameters,
//! forward kinematics, DoF layouts, angle conversions, and analytic joint
//! extraction.

mod fk;
mod params;
mod template;

pub use fk::{compose_state, extract_joints, HandState, JointSet};
pub use params::{
    axis_angle_to_euler, clamp_pose, dof_kind, dof_name, euler_to_axis_angle, euler_to_rotation,
    expand_dofs, reduce_dofs, rotation_to_euler, rotation_to_euler_saturating, validate_pose,
    AngleRep, DofKind, DofLayout, DofViolation, JointLimits, ObjectParams, PoseParams,
    ShapeParams, Vartheta, DOFS_FULL, DOFS_REDUCED,
};
pub use template::{HandTemplate, LinkAnchor, FINGER_NAMES, LINK_NAMES, NUM_FINGERS, NUM_LINKS, PALM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HandError {
    #[error("radii underflow on link '{0}': posed radius {1:.4} m below 1 mm")]
    RadiiUnderflow(&'static str, f64),
    #[error("object radii not positive: {0:?}")]
    ObjectRadii([f64; 3]),
    #[error("gimbal lock: pitch {0:.6} rad too close to +/- pi/2 for Euler extraction")]
    GimbalLock(f64),
    #[error("expected {expected} pose values, got {got}")]
    DofLength { expected: usize, got: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}
