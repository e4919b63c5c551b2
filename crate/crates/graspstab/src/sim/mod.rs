//! Impulse-based rigid multibody simulation: a PD-driven articulated hand,
//! a passive object under gravity, Coulomb friction contacts solved by
//! sequential impulses, split-impulse positional correction, rollout
//! recording, and the object reset rule.

mod scene;
mod world;

pub use scene::{build_scene, rollout, ContactForce, RolloutRecord, SimScene};
pub use world::{BallJoint, Body, BodyGroup, BodyState, StepRecord, World, WorldMotor};

use crate::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial hand-object penetration {0:.4} m exceeds 0.03 m")]
    InitialPenetration(f64),
    #[error("solver divergence: body speed {0:.3e} m/s")]
    Divergence(f64),
    #[error(transparent)]
    Contact(#[from] crate::contact::ContactError),
    #[error(transparent)]
    Hand(#[from] crate::hand::HandError),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}

/// Simulation parameters. Defaults are the reference constants: 240 Hz
/// stepping, 120 steps (0.5 s), gravity down the Y axis, hand-object
/// friction 0.8, restitution 1.0 (applied above a 0.2 m/s approach
/// threshold), and the 0.1 m / 0.3 pi object reset thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub steps: usize,
    pub gravity: Vec3,
    pub friction: f64,
    pub restitution: f64,
    pub restitution_threshold: f64,
    /// Joint PD stiffness (N*m/rad), solved implicitly at the velocity
    /// level so stiff gains on light links stay stable.
    pub pd_kp: f64,
    /// Joint PD damping; `None` selects near-critical damping per joint
    /// from the child link inertia, 2*sqrt(kp*I).
    pub pd_kd: Option<f64>,
    pub torque_clamp: f64,
    /// Root translational PD stiffness (N/m) toward the root target.
    pub root_kp: f64,
    pub root_kd: Option<f64>,
    pub root_force_clamp: f64,
    pub solver_iterations: usize,
    pub position_iterations: usize,
    pub baumgarte: f64,
    pub slop: f64,
    /// Contact detection margin; proximal contacts within it become
    /// speculative constraints.
    pub margin: f64,
    pub reset_pos_threshold: f64,
    pub reset_ang_threshold: f64,
    pub link_density: f64,
    pub max_velocity: f64,
    pub self_collision: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            steps: 120,
            gravity: Vec3::new(0.0, -9.81, 0.0),
            friction: 0.8,
            restitution: 1.0,
            restitution_threshold: 0.2,
            pd_kp: 3.0,
            pd_kd: None,
            torque_clamp: 2.0,
            root_kp: 300.0,
            root_kd: None,
            root_force_clamp: 50.0,
            solver_iterations: 16,
            position_iterations: 8,
            baumgarte: 0.2,
            slop: 0.001,
            margin: 0.001,
            reset_pos_threshold: 0.1,
            reset_ang_threshold: 0.3 * std::f64::consts::PI,
            link_density: 1100.0,
            max_velocity: 1e3,
            self_collision: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |w: &str| {
            Err(SimError::Geom(crate::geom::GeomError::InvalidMesh(format!(
                "sim config: {w}"
            ))))
        };
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.friction < 0.0 {
            return bad("friction must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return bad("restitution must be in [0, 1]");
        }
        if !(self.reset_pos_threshold > 0.0 && self.reset_ang_threshold > 0.0) {
            return bad("reset thresholds must be positive");
        }
        Ok(())
    }
}
