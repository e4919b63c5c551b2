//! The stability cost over a simulation rollout: a state-drift term (how
//! far the hand-object state moved during simulation) plus a physics term
//! (how well contact forces balance the object against gravity, with a
//! contact-count floor), and the displacement metric.

use crate::geom::RigidBodyProps;
use crate::hand::Vartheta;
use crate::sim::RolloutRecord;
use crate::{Quat, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("quaternion norm {0} deviates from 1 by more than 1e-6")]
    NonUnitQuaternion(f64),
    #[error("pose vectors have different layouts or lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("no normalizer: gravity is zero and the acceleration targets are zero")]
    NoNormalizer,
    #[error("empty rollout record")]
    EmptyRecord,
}

/// Target object kinematics; zero means the grasp should hold the object
/// still.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetKinematics {
    pub lin_acc: Vec3,
    pub ang_acc: Vec3,
}

/// How the recorded contact resultant enters the force term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GravityAccounting {
    /// The recorded f(t) is the contact-only resultant; gravity is added so
    /// the term measures total applied force against the target
    /// acceleration: |f + M g - M a|^2 / |M g|^2.
    #[default]
    ContactPlusGravity,
    /// The recorded f(t) is compared to M a directly: |f - M a|^2 / |M g|^2.
    RawContact,
}

/// The hand-object state on one side of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub object_pos: Vec3,
    pub object_rot: Quat,
    pub vartheta: Vartheta,
    pub root: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pos: f64,
    pub ang: f64,
    pub pose_l1: f64,
    pub root: f64,
    pub force: f64,
    pub torque: f64,
    pub contact: f64,
}

/// Total stability cost with its state/physics decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCost {
    pub c_state: f64,
    pub c_physics: f64,
    pub total: f64,
    pub breakdown: CostBreakdown,
}

/// Rotation angle of a (near-)unit quaternion: 2 acos(|w|), in [0, pi].
/// The absolute value makes q and -q equal, as they are the same rotation.
pub fn quat_angle(q: &nalgebra::Quaternion<f64>) -> Result<f64, StabilityError> {
    let n = q.norm();
    if (n - 1.0).abs() > 1e-6 {
        return Err(StabilityError::NonUnitQuaternion(n));
    }
    Ok(2.0 * (q.w.abs() / n).min(1.0).acos())
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    }
    x
}

/// State drift between the pre-simulation targets and the post-simulation
/// state: object translation, object rotation angle, mean absolute pose
/// change (angles wrapped), and root translation.
pub fn state_cost(before: &GraspState, after: &GraspState) -> Result<f64, StabilityError> {
    Ok(state_cost_breakdown(before, after)?.0)
}

pub fn state_cost_breakdown(
    before: &GraspState,
    after: &GraspState,
) -> Result<(f64, CostBreakdown), StabilityError> {
    if before.vartheta.layout != after.vartheta.layout
        || before.vartheta.values.len() != after.vartheta.values.len()
    {
        return Err(StabilityError::DimensionMismatch(
            before.vartheta.values.len(),
            after.vartheta.values.len(),
        ));
    }
    let pos = (after.object_pos - before.object_pos).norm();
    let rel = after.object_rot.inverse() * before.object_rot;
    let ang = quat_angle(rel.quaternion())?;
    let n = before.vartheta.values.len() as f64;
    let pose_l1 = before
        .vartheta
        .values
        .iter()
        .zip(&after.vartheta.values)
        .map(|(b, a)| wrap_angle(a - b).abs())
        .sum::<f64>()
        / n;
    let root = (after.root - before.root).norm();
    let breakdown = CostBreakdown {
        pos,
        ang,
        pose_l1,
        root,
        ..CostBreakdown::default()
    };
    Ok((pos + ang + pose_l1 + root, breakdown))
}

/// Time-averaged physics cost: normalized force balance, normalized torque
/// balance, and the contact-count floor `exp(-m(t))`. When the torque
/// normalizer `|I alpha|` vanishes (the usual zero-acceleration target), it
/// is replaced by `(|M g| * char_len)^2` with `char_len` a characteristic
/// object length.
pub fn physics_cost(
    record: &RolloutRecord,
    props: &RigidBodyProps,
    targets: &TargetKinematics,
    char_len: f64,
    gravity: Vec3,
    accounting: GravityAccounting,
) -> Result<(f64, CostBreakdown), StabilityError> {
    if record.force.is_empty() {
        return Err(StabilityError::EmptyRecord);
    }
    let mg = props.mass * gravity;
    let mg2 = mg.norm_squared();
    if mg2 == 0.0 {
        return Err(StabilityError::NoNormalizer);
    }
    let ialpha = props.inertia * targets.ang_acc;
    let torque_denom = if ialpha.norm_squared() > 0.0 {
        ialpha.norm_squared()
    } else {
        (mg.norm() * char_len).powi(2)
    };
    let ma = props.mass * targets.lin_acc;

    let steps = record.force.len();
    let mut force_sum = 0.0;
    let mut torque_sum = 0.0;
    let mut contact_sum = 0.0;
    for t in 0..steps {
        let f_applied = match accounting {
            GravityAccounting::ContactPlusGravity => record.force[t] + mg,
            GravityAccounting::RawContact => record.force[t],
        };
        force_sum += (f_applied - ma).norm_squared() / mg2;
        torque_sum += (record.torque[t] - ialpha).norm_squared() / torque_denom;
        contact_sum += (-(record.contact_count[t] as f64)).exp();
    }
    let n = steps as f64;
    let breakdown = CostBreakdown {
        force: force_sum / n,
        torque: torque_sum / n,
        contact: contact_sum / n,
        ..CostBreakdown::default()
    };
    Ok((breakdown.force + breakdown.torque + breakdown.contact, breakdown))
}

/// Full stability cost from a rollout: state drift plus physics balance.
#[allow(clippy::too_many_arguments)]
pub fn total_cost(
    before: &GraspState,
    after: &GraspState,
    record: &RolloutRecord,
    props: &RigidBodyProps,
    targets: &TargetKinematics,
    char_len: f64,
    gravity: Vec3,
    accounting: GravityAccounting,
) -> Result<StabilityCost, StabilityError> {
    let (c_state, sb) = state_cost_breakdown(before, after)?;
    let (c_physics, pb) = physics_cost(record, props, targets, char_len, gravity, accounting)?;
    Ok(StabilityCost {
        c_state,
        c_physics,
        total: c_state + c_physics,
        breakdown: CostBreakdown {
            pos: sb.pos,
            ang: sb.ang,
            pose_l1: sb.pose_l1,
            root: sb.root,
            force: pb.force,
            torque: pb.torque,
            contact: pb.contact,
        },
    })
}

/// Final-pose displacement of the object in millimeters, ignoring resets
/// (report those separately via `record.reset_count()`).
pub fn simulation_displacement(record: &RolloutRecord) -> f64 {
    (record.final_object_pos - record.initial_object_pos).norm() * 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::DofLayout;
    use crate::Mat3;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn props(mass: f64) -> RigidBodyProps {
        RigidBodyProps {
            mass,
            com: Vec3::zeros(),
            inertia: Mat3::identity() * (mass * 0.001),
        }
    }

    fn synthetic_record(
        steps: usize,
        force: Vec3,
        torque: Vec3,
        contacts: usize,
        displacement: Vec3,
    ) -> RolloutRecord {
        RolloutRecord {
            dt: 1.0 / 240.0,
            force: vec![force; steps],
            torque: vec![torque; steps],
            contact_count: vec![contacts; steps],
            resets: Vec::new(),
            object_pos: vec![displacement; steps],
            object_rot: vec![Quat::identity(); steps],
            final_vartheta: Vartheta::zeros(DofLayout::Reduced),
            final_root: Vec3::zeros(),
            final_object_pos: displacement,
            final_object_rot: Quat::identity(),
            initial_object_pos: Vec3::zeros(),
            initial_object_rot: Quat::identity(),
            final_contacts: Vec::new(),
            impulse_audit: Vec::new(),
        }
    }

    fn gravity() -> Vec3 {
        Vec3::new(0.0, -9.81, 0.0)
    }

    #[test]
    fn quat_angle_basics() {
        assert_abs_diff_eq!(quat_angle(Quat::identity().quaternion()).unwrap(), 0.0);
        let q = Quat::from_scaled_axis(Vec3::new(0.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!(quat_angle(q.quaternion()).unwrap(), PI / 2.0, epsilon = 1e-12);
        let neg = nalgebra::Quaternion::new(-q.w, -q.i, -q.j, -q.k);
        assert_abs_diff_eq!(
            quat_angle(&neg).unwrap(),
            quat_angle(q.quaternion()).unwrap(),
            epsilon = 1e-12
        );
        let bad = nalgebra::Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(quat_angle(&bad).is_err());
    }

    #[test]
    fn quat_angle_is_a_metric_up_to_double_cover() {
        let mut rng = crate::test_rng(91);
        for _ in 0..200 {
            let a = Quat::from_scaled_axis(crate::rand_vec3(&mut rng, 1.5));
            let b = Quat::from_scaled_axis(crate::rand_vec3(&mut rng, 1.5));
            let c = Quat::from_scaled_axis(crate::rand_vec3(&mut rng, 1.5));
            let d = |x: &Quat, y: &Quat| quat_angle((x.inverse() * y).quaternion()).unwrap();
            assert_abs_diff_eq!(d(&a, &b), d(&b, &a), epsilon = 1e-9);
            assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn state_cost_cases() {
        let zero = GraspState {
            object_pos: Vec3::zeros(),
            object_rot: Quat::identity(),
            vartheta: Vartheta::zeros(DofLayout::Reduced),
            root: Vec3::zeros(),
        };
        assert_abs_diff_eq!(state_cost(&zero, &zero).unwrap(), 0.0);

        let mut moved = zero.clone();
        moved.object_pos = Vec3::new(0.03, 0.0, 0.0);
        assert_abs_diff_eq!(state_cost(&zero, &moved).unwrap(), 0.03, epsilon = 1e-15);

        let mut posed = zero.clone();
        posed.vartheta.values[5] = 0.23;
        assert_abs_diff_eq!(state_cost(&zero, &posed).unwrap(), 0.01, epsilon = 1e-15);

        let mut full = zero.clone();
        full.vartheta = Vartheta::zeros(DofLayout::Full);
        assert!(matches!(
            state_cost(&zero, &full),
            Err(StabilityError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn angle_wrapping_in_pose_term() {
        let zero = GraspState {
            object_pos: Vec3::zeros(),
            object_rot: Quat::identity(),
            vartheta: Vartheta::zeros(DofLayout::Reduced),
            root: Vec3::zeros(),
        };
        let mut wrapped = zero.clone();
        wrapped.vartheta.values[3] = 2.0 * PI - 0.1; // equals -0.1 wrapped
        assert_abs_diff_eq!(
            state_cost(&zero, &wrapped).unwrap(),
            0.1 / 23.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn perfectly_balanced_record() {
        let p = props(0.5);
        // contact force cancels gravity exactly, no torque, two contacts
        let rec = synthetic_record(120, -p.mass * gravity(), Vec3::zeros(), 2, Vec3::zeros());
        let (c, b) = physics_cost(
            &rec,
            &p,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::ContactPlusGravity,
        )
        .unwrap();
        assert_abs_diff_eq!(b.force, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.torque, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn free_fall_record_at_least_two() {
        let p = props(0.5);
        let rec = synthetic_record(120, Vec3::zeros(), Vec3::zeros(), 0, Vec3::zeros());
        let (c, b) = physics_cost(
            &rec,
            &p,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::ContactPlusGravity,
        )
        .unwrap();
        assert_abs_diff_eq!(b.force, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.contact, 1.0, epsilon = 1e-12);
        assert!(c >= 2.0);
    }

    #[test]
    fn mass_scaling_invariance() {
        let p1 = props(0.5);
        let p2 = props(1.0);
        let f = Vec3::new(1.0, 3.0, -0.5);
        let r1 = synthetic_record(60, f, Vec3::zeros(), 1, Vec3::zeros());
        let r2 = synthetic_record(60, f * 2.0, Vec3::zeros(), 1, Vec3::zeros());
        let c1 = physics_cost(
            &r1,
            &p1,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::ContactPlusGravity,
        )
        .unwrap()
        .0;
        let c2 = physics_cost(
            &r2,
            &p2,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::ContactPlusGravity,
        )
        .unwrap()
        .0;
        assert_abs_diff_eq!(c1, c2, epsilon = 1e-12);
    }

    #[test]
    fn zero_gravity_rejected() {
        let p = props(0.5);
        let rec = synthetic_record(10, Vec3::zeros(), Vec3::zeros(), 0, Vec3::zeros());
        assert!(matches!(
            physics_cost(
                &rec,
                &p,
                &TargetKinematics::default(),
                0.03,
                Vec3::zeros(),
                GravityAccounting::ContactPlusGravity,
            ),
            Err(StabilityError::NoNormalizer)
        ));
    }

    #[test]
    fn raw_contact_accounting_switch() {
        let p = props(0.5);
        // raw accounting treats the recorded force as the total force
        let rec = synthetic_record(10, Vec3::zeros(), Vec3::zeros(), 3, Vec3::zeros());
        let (c, b) = physics_cost(
            &rec,
            &p,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::RawContact,
        )
        .unwrap();
        assert_abs_diff_eq!(b.force, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, (-3.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn total_cost_composes_and_is_monotone_in_drift() {
        let p = props(0.5);
        let zero = GraspState {
            object_pos: Vec3::zeros(),
            object_rot: Quat::identity(),
            vartheta: Vartheta::zeros(DofLayout::Reduced),
            root: Vec3::zeros(),
        };
        let rec = synthetic_record(60, -p.mass * gravity(), Vec3::zeros(), 2, Vec3::zeros());
        let base = total_cost(
            &zero,
            &zero,
            &rec,
            &p,
            &TargetKinematics::default(),
            0.03,
            gravity(),
            GravityAccounting::ContactPlusGravity,
        )
        .unwrap();
        assert_abs_diff_eq!(base.total, base.c_state + base.c_physics, epsilon = 1e-15);
        assert_abs_diff_eq!(base.c_state, 0.0);
        let mut prev = base.total;
        for k in 1..5 {
            let mut after = zero.clone();
            after.object_pos = Vec3::new(0.01 * k as f64, 0.0, 0.0);
            let c = total_cost(
                &zero,
                &after,
                &rec,
                &p,
                &TargetKinematics::default(),
                0.03,
                gravity(),
                GravityAccounting::ContactPlusGravity,
            )
            .unwrap();
            assert!(c.total > prev);
            prev = c.total;
        }
    }

    #[test]
    fn displacement_metric() {
        let rec = synthetic_record(10, Vec3::zeros(), Vec3::zeros(), 0, Vec3::zeros());
        assert_abs_diff_eq!(simulation_displacement(&rec), 0.0);
        let fall = synthetic_record(
            120,
            Vec3::zeros(),
            Vec3::zeros(),
            0,
            Vec3::new(0.0, -1.23646875, 0.0),
        );
        assert_abs_diff_eq!(simulation_displacement(&fall), 1236.46875, epsilon = 1e-9);
        let mut reset_rec = synthetic_record(10, Vec3::zeros(), Vec3::zeros(), 0, Vec3::zeros());
        reset_rec.resets = vec![3, 7];
        assert_abs_diff_eq!(simulation_displacement(&reset_rec), 0.0);
        assert_eq!(reset_rec.reset_count(), 2);
    }
}
