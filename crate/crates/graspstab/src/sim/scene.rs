//! Scene assembly from a posed hand state plus an object mesh, and the
//! recorded rollout: per-step contact resultants on the object, contact
//! counts, the reset rule, and final-state readout.

use super::world::{BallJoint, Body, BodyGroup, World, WorldMotor};
use super::{SimConfig, SimError};
use crate::contact::{ConvexShape, HullShape};
use crate::geom::{Ellipsoid, RigidBodyProps, TriMesh};
use crate::hand::{
    euler_to_rotation, reduce_dofs, rotation_to_euler_saturating, DofLayout, HandState, Vartheta,
    DOFS_FULL, NUM_LINKS,
};
use crate::{Quat, Vec3};
use serde::{Deserialize, Serialize};

/// A built interaction scene: hand multibody, object rigid body, and the PD
/// targets the rollout holds.
#[derive(Debug, Clone)]
pub struct SimScene {
    pub world: World,
    pub palm_body: usize,
    pub object_body: usize,
    /// Object center of mass in the mesh frame; the reported object pose is
    /// the mesh-frame origin.
    pub com_local: Vec3,
    /// Initial object pose (p, q), also the reset target.
    pub initial_pos: Vec3,
    pub initial_rot: Quat,
    pub palm_rest: Quat,
    pub layout: DofLayout,
    pub target_vartheta: Vartheta,
    pub target_root: Vec3,
}

/// One contact with the force it transmitted, world frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactForce {
    pub position: Vec3,
    pub normal: Vec3,
    pub force: Vec3,
    pub body_a: usize,
    pub body_b: usize,
}

/// Per-step record of the object's contact interaction over a rollout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub dt: f64,
    /// Resultant contact force on the object per step (N).
    pub force: Vec<Vec3>,
    /// Resultant contact torque about the object center of mass (N*m).
    pub torque: Vec<Vec3>,
    /// Contact points on the object carrying normal impulse.
    pub contact_count: Vec<usize>,
    /// Steps at which the object was reset to its initial pose.
    pub resets: Vec<usize>,
    /// Object pose after each step (mesh-frame origin and orientation).
    pub object_pos: Vec<Vec3>,
    pub object_rot: Vec<Quat>,
    pub final_vartheta: Vartheta,
    pub final_root: Vec3,
    pub final_object_pos: Vec3,
    pub final_object_rot: Quat,
    pub initial_object_pos: Vec3,
    pub initial_object_rot: Quat,
    /// Contacts of the final step with their transmitted forces.
    pub final_contacts: Vec<ContactForce>,
    /// (normal, tangential) impulse pairs across every step, for audits.
    #[serde(skip)]
    pub impulse_audit: Vec<(f64, f64)>,
}

impl RolloutRecord {
    pub fn steps(&self) -> usize {
        self.force.len()
    }

    pub fn reset_count(&self) -> usize {
        self.resets.len()
    }
}

/// Builds the interaction scene: one dynamic ellipsoid body per hand link
/// joined by ball joints at the posed anchors, implicit PD motors holding
/// the sampled targets, and the object mesh as a free convex-hull body at
/// the pose of the state's object ellipsoid. All velocities start at zero;
/// gravity acts on the object while the actuated hand is gravity-
/// compensated. Errors if the hand initially penetrates the object deeper
/// than 30 mm.
pub fn build_scene(
    state: &HandState,
    object_mesh: &TriMesh,
    props: &RigidBodyProps,
    cfg: &SimConfig,
    targets: (&Vartheta, Vec3),
) -> Result<SimScene, SimError> {
    cfg.validate()?;
    props.validate()?;
    let (vartheta, target_root) = targets;
    let mut world = World {
        self_collision: cfg.self_collision,
        ..World::default()
    };

    // hand links: the body frame is the link frame (shape axis-aligned)
    for (link, e) in state.links.iter().enumerate() {
        let shape_local = Ellipsoid::new(Vec3::zeros(), e.radii(), Vec3::zeros())?;
        let mass = cfg.link_density * e.volume();
        let mut body = Body::dynamic(
            ConvexShape::Ellipsoid(shape_local),
            mass,
            shape_local.unit_inertia(mass),
            e.center(),
            Quat::from_scaled_axis(e.axis_angle()),
            BodyGroup::HandLink(link),
        );
        // the hand is actuated: it does not fall under gravity
        body.gravity_scale = 0.0;
        world.add_body(body);
    }

    // object: hull collision shape about the center of mass
    let com = props.com;
    let hull = HullShape::new(object_mesh.vertices.iter().map(|v| v - com).collect())?;
    let (p_init, q_init) = state.object_pose();
    let object_body = world.add_body(Body::dynamic(
        ConvexShape::Hull(hull),
        props.mass,
        props.inertia,
        p_init + q_init * com,
        q_init,
        BodyGroup::Object,
    ));

    // joints with implicit PD motors toward the sampled pose
    let full = vartheta.full_values();
    for child in 1..NUM_LINKS {
        let parent = parent_of(child);
        let g = state.anchor_points[child - 1];
        let bp = &world.bodies[parent];
        let bc = &world.bodies[child];
        let anchor_parent = bp.orientation.inverse() * (g - bp.position);
        let anchor_child = bc.orientation.inverse() * (g - bc.position);
        let rest_rel = state.rel_rest[child - 1];
        let delta = euler_to_rotation(Vec3::new(
            full[3 * child],
            full[3 * child + 1],
            full[3 * child + 2],
        ));
        let target_rel = rest_rel * Quat::from_rotation_matrix(&delta);
        let i_char = world.bodies[child].inertia_local.diagonal().mean();
        let kd = cfg.pd_kd.unwrap_or_else(|| 2.0 * (cfg.pd_kp * i_char).sqrt());
        world.add_joint(BallJoint {
            parent,
            child,
            anchor_parent,
            anchor_child,
            rest_rel,
            target_rel,
            kp: cfg.pd_kp,
            kd,
            max_torque: cfg.torque_clamp,
        });
    }

    // root drive: palm toward (target_root, rest orientation + root delta)
    let root_delta = euler_to_rotation(Vec3::new(full[0], full[1], full[2]));
    let target_rot = state.palm_rest * Quat::from_rotation_matrix(&root_delta);
    let hand_mass: f64 = world.bodies[..NUM_LINKS].iter().map(|b| 1.0 / b.inv_mass).sum();
    let palm_i = world.bodies[0].inertia_local.diagonal().mean();
    world.add_motor(WorldMotor {
        body: 0,
        target_pos: target_root,
        target_rot,
        kp_lin: cfg.root_kp,
        kd_lin: cfg.root_kd.unwrap_or_else(|| 2.0 * (cfg.root_kp * hand_mass).sqrt()),
        max_force: cfg.root_force_clamp,
        kp_ang: cfg.pd_kp,
        kd_ang: cfg.pd_kd.unwrap_or_else(|| 2.0 * (cfg.pd_kp * palm_i).sqrt()),
        max_torque: cfg.torque_clamp,
    });

    let scene = SimScene {
        world,
        palm_body: 0,
        object_body,
        com_local: com,
        initial_pos: p_init,
        initial_rot: q_init,
        palm_rest: state.palm_rest,
        layout: vartheta.layout,
        target_vartheta: vartheta.clone(),
        target_root,
    };

    // the estimated state must not start irrecoverably inside the object
    let initial_pen = scene.max_hand_object_penetration()?;
    if initial_pen > 0.03 {
        return Err(SimError::InitialPenetration(initial_pen));
    }
    Ok(scene)
}

fn parent_of(child: usize) -> usize {
    if (child - 1) % 3 == 0 {
        0
    } else {
        child - 1
    }
}

impl SimScene {
    /// Mesh-frame object pose (p, q).
    pub fn object_pose(&self) -> (Vec3, Quat) {
        let b = &self.world.bodies[self.object_body];
        (b.position - b.orientation * self.com_local, b.orientation)
    }

    pub fn max_hand_object_penetration(&self) -> Result<f64, SimError> {
        let mut max_depth = 0.0f64;
        for m in self.world.detect(0.0)? {
            if m.body_a == self.object_body || m.body_b == self.object_body {
                max_depth = max_depth.max(m.max_depth());
            }
        }
        Ok(max_depth)
    }

    /// Reads the current joint deltas back as a flat pose vector in the
    /// scene's layout. Euler extraction saturates at gimbal lock.
    pub fn read_vartheta(&self) -> Vartheta {
        let mut full = vec![0.0; DOFS_FULL];
        let delta = self.palm_rest.inverse() * self.world.bodies[self.palm_body].orientation;
        let e = rotation_to_euler_saturating(&delta.to_rotation_matrix());
        full[0] = e.x;
        full[1] = e.y;
        full[2] = e.z;
        for j in &self.world.joints {
            let rel = self.world.bodies[j.parent].orientation.inverse()
                * self.world.bodies[j.child].orientation;
            let delta = j.rest_rel.inverse() * rel;
            let e = rotation_to_euler_saturating(&delta.to_rotation_matrix());
            full[3 * j.child] = e.x;
            full[3 * j.child + 1] = e.y;
            full[3 * j.child + 2] = e.z;
        }
        match self.layout {
            DofLayout::Full => Vartheta { layout: DofLayout::Full, values: full },
            DofLayout::Reduced => Vartheta {
                layout: DofLayout::Reduced,
                values: reduce_dofs(&full),
            },
        }
    }

    /// Adds a static collision body (fixture helper).
    pub fn add_static_hull(
        &mut self,
        points: Vec<Vec3>,
        position: Vec3,
    ) -> Result<usize, SimError> {
        let hull = HullShape::new(points)?;
        Ok(self
            .world
            .add_body(Body::fixed(ConvexShape::Hull(hull), position, Quat::identity())))
    }
}

/// Runs `cfg.steps` steps, recording the object's contact resultants and
/// applying the reset rule: when the object drifts beyond the positional
/// threshold or turns beyond the angular threshold from its initial pose,
/// its pose is restored, velocities are zeroed, and recording continues.
pub fn rollout(scene: &mut SimScene, cfg: &SimConfig) -> Result<RolloutRecord, SimError> {
    let mut force = Vec::with_capacity(cfg.steps);
    let mut torque = Vec::with_capacity(cfg.steps);
    let mut contact_count = Vec::with_capacity(cfg.steps);
    let mut resets = Vec::new();
    let mut object_pos = Vec::with_capacity(cfg.steps);
    let mut object_rot = Vec::with_capacity(cfg.steps);
    let mut impulse_audit = Vec::new();
    let mut final_contacts = Vec::new();

    for step in 0..cfg.steps {
        let rec = scene.world.step(cfg)?;
        force.push(rec.object_impulse / cfg.dt);
        torque.push(rec.object_torque_impulse / cfg.dt);
        contact_count.push(rec.contact_count);
        impulse_audit.extend_from_slice(&rec.impulse_audit);
        if step + 1 == cfg.steps {
            final_contacts = rec
                .contacts
                .iter()
                .map(|c| ContactForce {
                    position: c.position,
                    normal: c.normal,
                    force: c.impulse / cfg.dt,
                    body_a: c.body_a,
                    body_b: c.body_b,
                })
                .collect();
        }

        let (p, q) = scene.object_pose();
        object_pos.push(p);
        object_rot.push(q);
        let drift = (p - scene.initial_pos).norm();
        let turn = 2.0 * (q.inverse() * scene.initial_rot).w.abs().min(1.0).acos();
        if drift > cfg.reset_pos_threshold || turn > cfg.reset_ang_threshold {
            let com = scene.com_local;
            let b = &mut scene.world.bodies[scene.object_body];
            b.orientation = scene.initial_rot;
            b.position = scene.initial_pos + scene.initial_rot * com;
            b.lin_vel = Vec3::zeros();
            b.ang_vel = Vec3::zeros();
            resets.push(step);
        }
    }

    let (p, q) = scene.object_pose();
    Ok(RolloutRecord {
        dt: cfg.dt,
        force,
        torque,
        contact_count,
        resets,
        object_pos,
        object_rot,
        final_vartheta: scene.read_vartheta(),
        final_root: scene.world.bodies[scene.palm_body].position,
        final_object_pos: p,
        final_object_rot: q,
        initial_object_pos: scene.initial_pos,
        initial_object_rot: scene.initial_rot,
        final_contacts,
        impulse_audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::convex_hull;
    use crate::hand::{compose_state, HandTemplate, ObjectParams, PoseParams, ShapeParams};
    use approx::assert_abs_diff_eq;

    fn ball_mesh(r: f64) -> TriMesh {
        let e = Ellipsoid::sphere(Vec3::zeros(), r).unwrap();
        convex_hull(&e.sample_surface(128)).unwrap()
    }

    fn far_scene() -> (SimScene, SimConfig) {
        let cfg = SimConfig::default();
        let template = HandTemplate::default();
        let state = compose_state(
            &template,
            &ShapeParams::zeros(),
            &PoseParams::zeros(),
            &ObjectParams {
                radii_delta: [-0.021, 0.0115, -0.021],
                axis_angle: [0.0; 3],
                center_offset: [0.0, 0.5, 0.0],
            },
            Vec3::zeros(),
        )
        .unwrap();
        let mesh = ball_mesh(0.024);
        let props = mesh.mass_props(500.0).unwrap();
        let vt = Vartheta::zeros(DofLayout::Reduced);
        let scene = build_scene(&state, &mesh, &props, &cfg, (&vt, Vec3::zeros())).unwrap();
        (scene, cfg)
    }

    #[test]
    fn build_reproduces_hand_state_poses() {
        let template = HandTemplate::default();
        let state = compose_state(
            &template,
            &ShapeParams::zeros(),
            &PoseParams::zeros(),
            &ObjectParams::far_away(),
            Vec3::new(0.01, 0.02, -0.03),
        )
        .unwrap();
        let mesh = ball_mesh(0.024);
        let props = mesh.mass_props(500.0).unwrap();
        let vt = Vartheta::zeros(DofLayout::Reduced);
        let cfg = SimConfig::default();
        let scene = build_scene(&state, &mesh, &props, &cfg, (&vt, state.root_t)).unwrap();
        for (link, e) in state.links.iter().enumerate() {
            let b = &scene.world.bodies[link];
            assert_abs_diff_eq!((b.position - e.center()).norm(), 0.0, epsilon = 1e-9);
            assert!(b.orientation.angle_to(&Quat::from_scaled_axis(e.axis_angle())) < 1e-9);
            assert_abs_diff_eq!(b.lin_vel.norm(), 0.0);
        }
        let (p, q) = scene.object_pose();
        let (ep, eq) = state.object_pose();
        assert_abs_diff_eq!((p - ep).norm(), 0.0, epsilon = 1e-9);
        assert!(q.angle_to(&eq) < 1e-9);
    }

    #[test]
    fn no_contact_rollout_is_silent_for_hand() {
        // object far away: no contacts, hand holds pose, object free-falls
        // into a reset cycle
        let (mut scene, cfg) = far_scene();
        let rec = rollout(&mut scene, &cfg).unwrap();
        assert_eq!(rec.steps(), 120);
        assert!(rec.contact_count.iter().all(|&m| m == 0));
        assert!(rec.force.iter().all(|f| f.norm() == 0.0));
        assert!(rec.torque.iter().all(|t| t.norm() == 0.0));
        // free object falls 0.1 m in about 0.143 s (34 steps), then resets
        assert!(rec.reset_count() >= 2);
    }

    #[test]
    fn hand_holds_pose_without_disturbance() {
        let (mut scene, cfg) = far_scene();
        let before: Vec<Vec3> = scene.world.bodies[..NUM_LINKS]
            .iter()
            .map(|b| b.position)
            .collect();
        let rec = rollout(&mut scene, &cfg).unwrap();
        for (link, b) in scene.world.bodies[..NUM_LINKS].iter().enumerate() {
            assert!(
                (b.position - before[link]).norm() < 1e-4,
                "link {link} drifted {}",
                (b.position - before[link]).norm()
            );
        }
        // joint drift below 1e-3 rad
        for (k, v) in rec.final_vartheta.values.iter().enumerate() {
            assert!(v.abs() < 1e-3, "dof {k} drifted to {v}");
        }
        assert_abs_diff_eq!(rec.final_root.norm(), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn initial_penetration_rejected() {
        let template = HandTemplate::default();
        // object ellipsoid centered on the palm: deep overlap
        let state = compose_state(
            &template,
            &ShapeParams::zeros(),
            &PoseParams::zeros(),
            &ObjectParams::zeros(),
            Vec3::zeros(),
        )
        .unwrap();
        let mesh = ball_mesh(0.045);
        let props = mesh.mass_props(500.0).unwrap();
        let vt = Vartheta::zeros(DofLayout::Reduced);
        let cfg = SimConfig::default();
        let err = build_scene(&state, &mesh, &props, &cfg, (&vt, Vec3::zeros())).unwrap_err();
        assert!(matches!(err, SimError::InitialPenetration(_)));
    }

    #[test]
    fn reset_rule_fires_on_first_offending_step() {
        let (mut scene, cfg) = far_scene();
        // launch the object sideways at 1 m/s: crosses 0.1 m just after
        // step k where k*dt*1.0 > 0.1
        scene.world.bodies[scene.object_body].lin_vel = Vec3::new(1.0, 0.0, 0.0);
        scene.world.bodies[scene.object_body].gravity_scale = 0.0;
        let rec = rollout(&mut scene, &cfg).unwrap();
        // drift after n steps: n*dt (velocity constant); first n with
        // n/240 > 0.1 is n = 25 (0-indexed step 24)
        assert_eq!(rec.resets.first().copied(), Some(24));
    }

    #[test]
    fn reset_rule_fires_on_rotation() {
        let (mut scene, cfg) = far_scene();
        scene.world.bodies[scene.object_body].ang_vel = Vec3::new(0.0, 0.0, 8.0);
        scene.world.bodies[scene.object_body].gravity_scale = 0.0;
        let rec = rollout(&mut scene, &cfg).unwrap();
        // angle after n steps: 8*n/240 rad; threshold 0.3*pi = 0.9425 ->
        // first offending step index 28 (angle 0.9667)
        assert_eq!(rec.resets.first().copied(), Some(28));
    }

    #[test]
    fn object_mass_follows_density() {
        let mesh = ball_mesh(0.062); // ~1 liter
        let props = mesh.mass_props(500.0).unwrap();
        let vol = mesh.signed_volume(Vec3::zeros());
        assert_abs_diff_eq!(props.mass, 500.0 * vol, epsilon = 1e-9);
        assert!((vol - 0.001).abs() / 0.001 < 0.05, "volume {vol}");
    }

    #[test]
    fn pinch_between_pd_held_links_balances_gravity() {
        // a sphere squeezed between two PD-held pads: after a transient the
        // mean contact force magnitude approaches the object's weight
        let cfg = SimConfig::default();
        let mut world = World::default();
        let pad = Ellipsoid::new(
            Vec3::zeros(),
            Vec3::new(0.01, 0.025, 0.025),
            Vec3::zeros(),
        )
        .unwrap();
        let pad_mass = 1100.0 * pad.volume();
        for (side, x) in [(0usize, -0.0345f64), (1, 0.0345)] {
            let mut b = Body::dynamic(
                ConvexShape::Ellipsoid(pad),
                pad_mass,
                pad.unit_inertia(pad_mass),
                Vec3::new(x, 0.0, 0.0),
                Quat::identity(),
                BodyGroup::HandLink(side),
            );
            b.gravity_scale = 0.0;
            world.add_body(b);
            // squeeze: targets 1.5 mm inside the current pose
            let squeeze = if side == 0 { 0.0015 } else { -0.0015 };
            world.add_motor(WorldMotor {
                body: side,
                target_pos: Vec3::new(x + squeeze, 0.0, 0.0),
                target_rot: Quat::identity(),
                kp_lin: 2000.0,
                kd_lin: 2.0 * (2000.0f64 * pad_mass).sqrt(),
                max_force: 30.0,
                kp_ang: 3.0,
                kd_ang: 0.01,
                max_torque: 2.0,
            });
        }
        let ball = Ellipsoid::sphere(Vec3::zeros(), 0.025).unwrap();
        let ball_mass = 500.0 * ball.volume();
        world.add_body(Body::dynamic(
            ConvexShape::Ellipsoid(ball),
            ball_mass,
            ball.unit_inertia(ball_mass),
            Vec3::zeros(),
            Quat::identity(),
            BodyGroup::Object,
        ));

        let weight = ball_mass * 9.81;
        let mut forces = Vec::new();
        for step in 0..120 {
            let rec = world.step(&cfg).unwrap();
            if step >= 30 {
                forces.push(rec.object_impulse / cfg.dt);
            }
            for (jn, jt) in &rec.impulse_audit {
                assert!(*jn >= 0.0 && *jt <= cfg.friction * jn + 1e-9);
            }
        }
        let mean: Vec3 = forces.iter().sum::<Vec3>() / forces.len() as f64;
        assert!(
            (mean.norm() - weight).abs() / weight < 0.2,
            "mean contact force {} vs weight {weight}",
            mean.norm()
        );
        // the ball must not slip out
        let b = world.bodies.last().unwrap();
        assert!(b.position.norm() < 0.01, "ball escaped to {:?}", b.position);
    }
}
