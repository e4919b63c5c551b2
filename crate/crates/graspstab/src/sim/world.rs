//! The rigid-body world and its per-step solver: gravity, contact
//! detection, implicit PD motors, ball-joint and contact velocity impulses
//! with the Coulomb friction cone, semi-implicit Euler integration, and a
//! split-impulse (position only) correction pass.

use super::{SimConfig, SimError};
use crate::contact::{detect_contacts, ContactError, ConvexShape};
use crate::{Mat3, Quat, Vec3};
use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyGroup {
    HandLink(usize),
    Object,
    Static,
    Free,
}

#[derive(Debug, Clone)]
pub struct Body {
    pub shape: ConvexShape,
    pub inv_mass: f64,
    pub inertia_local: Mat3,
    pub inv_inertia_local: Mat3,
    pub position: Vec3,
    pub orientation: Quat,
    pub lin_vel: Vec3,
    pub ang_vel: Vec3,
    pub gravity_scale: f64,
    pub group: BodyGroup,
}

/// Pose and velocity snapshot of one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vec3,
    pub orientation: Quat,
    pub lin_vel: Vec3,
    pub ang_vel: Vec3,
}

impl Body {
    pub fn dynamic(
        shape: ConvexShape,
        mass: f64,
        inertia_local: Mat3,
        position: Vec3,
        orientation: Quat,
        group: BodyGroup,
    ) -> Body {
        Body {
            shape,
            inv_mass: 1.0 / mass,
            inertia_local,
            inv_inertia_local: inertia_local.try_inverse().expect("invertible inertia"),
            position,
            orientation,
            lin_vel: Vec3::zeros(),
            ang_vel: Vec3::zeros(),
            gravity_scale: 1.0,
            group,
        }
    }

    pub fn fixed(shape: ConvexShape, position: Vec3, orientation: Quat) -> Body {
        Body {
            shape,
            inv_mass: 0.0,
            inertia_local: Mat3::zeros(),
            inv_inertia_local: Mat3::zeros(),
            position,
            orientation,
            lin_vel: Vec3::zeros(),
            ang_vel: Vec3::zeros(),
            gravity_scale: 0.0,
            group: BodyGroup::Static,
        }
    }

    pub fn pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.position.into(), self.orientation)
    }

    pub fn state(&self) -> BodyState {
        BodyState {
            position: self.position,
            orientation: self.orientation,
            lin_vel: self.lin_vel,
            ang_vel: self.ang_vel,
        }
    }

    #[inline]
    fn inv_inertia_world(&self) -> Mat3 {
        let r = self.orientation.to_rotation_matrix();
        r * self.inv_inertia_local * r.transpose()
    }

    #[inline]
    fn velocity_at(&self, r: Vec3) -> Vec3 {
        self.lin_vel + self.ang_vel.cross(&r)
    }
}

/// Spherical joint between a parent and child body with an implicit
/// rotational PD motor driving the relative orientation toward a target.
#[derive(Debug, Clone)]
pub struct BallJoint {
    pub parent: usize,
    pub child: usize,
    pub anchor_parent: Vec3,
    pub anchor_child: Vec3,
    /// Template relative rotation parent->child; deltas are read against it.
    pub rest_rel: Quat,
    pub target_rel: Quat,
    pub kp: f64,
    pub kd: f64,
    pub max_torque: f64,
}

/// PD drive of one body toward a world-frame pose target (used for the hand
/// root, and for externally held bodies in fixtures).
#[derive(Debug, Clone)]
pub struct WorldMotor {
    pub body: usize,
    pub target_pos: Vec3,
    pub target_rot: Quat,
    pub kp_lin: f64,
    pub kd_lin: f64,
    pub max_force: f64,
    pub kp_ang: f64,
    pub kd_ang: f64,
    pub max_torque: f64,
}

#[derive(Debug, Clone, Default)]
pub struct World {
    pub bodies: Vec<Body>,
    pub joints: Vec<BallJoint>,
    pub motors: Vec<WorldMotor>,
    pub self_collision: bool,
}

/// Per-step solver outputs needed by recording and audits.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    /// Sum of contact impulses applied to the object this step (N*s).
    pub object_impulse: Vec3,
    /// Sum of r x impulse about the object center of mass (N*m*s).
    pub object_torque_impulse: Vec3,
    /// Contact points on the object carrying positive normal impulse.
    pub contact_count: usize,
    /// (normal impulse, tangential impulse magnitude) per contact point.
    pub impulse_audit: Vec<(f64, f64)>,
    /// World-space contact data with final impulses, for force export.
    pub contacts: Vec<ContactImpulse>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactImpulse {
    pub position: Vec3,
    pub normal: Vec3,
    /// Total impulse applied to body B along (normal, tangents).
    pub impulse: Vec3,
    pub body_a: usize,
    pub body_b: usize,
}

struct ContactConstraint {
    a: usize,
    b: usize,
    r_a: Vec3,
    r_b: Vec3,
    r_a_local: Vec3,
    r_b_local: Vec3,
    normal: Vec3,
    t1: Vec3,
    t2: Vec3,
    depth: f64,
    k_n: f64,
    k_t1: f64,
    k_t2: f64,
    /// Lower bound on post-solve normal velocity: restitution bounce or the
    /// speculative approach limit for separated-within-margin contacts.
    bias: f64,
    jn: f64,
    jt1: f64,
    jt2: f64,
    position: Vec3,
}

struct JointData {
    k_inv: Mat3,
    r_p: Vec3,
    r_c: Vec3,
    motor_y: Vec3,
    c_soft: f64,
    error_vec: Vec3,
}

impl World {
    pub fn add_body(&mut self, body: Body) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn add_joint(&mut self, joint: BallJoint) -> usize {
        self.joints.push(joint);
        self.joints.len() - 1
    }

    pub fn add_motor(&mut self, motor: WorldMotor) -> usize {
        self.motors.push(motor);
        self.motors.len() - 1
    }

    pub fn object_index(&self) -> Option<usize> {
        self.bodies.iter().position(|b| b.group == BodyGroup::Object)
    }

    fn adjacent(&self, i: usize, j: usize) -> bool {
        self.joints
            .iter()
            .any(|jt| (jt.parent == i && jt.child == j) || (jt.parent == j && jt.child == i))
    }

    fn should_collide(&self, i: usize, j: usize) -> bool {
        let (gi, gj) = (self.bodies[i].group, self.bodies[j].group);
        if gi == BodyGroup::Static && gj == BodyGroup::Static {
            return false;
        }
        if matches!(gi, BodyGroup::HandLink(_)) && matches!(gj, BodyGroup::HandLink(_)) {
            return self.self_collision && !self.adjacent(i, j);
        }
        true
    }

    /// Collects current contacts at the configured margin.
    pub fn detect(&self, margin: f64) -> Result<Vec<crate::contact::ContactManifold>, ContactError> {
        let mut out = Vec::new();
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                if !self.should_collide(i, j) {
                    continue;
                }
                let (bi, bj) = (&self.bodies[i], &self.bodies[j]);
                if let Some(m) =
                    detect_contacts(i, &bi.shape, &bi.pose(), j, &bj.shape, &bj.pose(), margin)?
                {
                    out.push(m);
                }
            }
        }
        Ok(out)
    }

    /// One semi-implicit Euler step: gravity, contact detection, implicit
    /// PD motors + joint + contact velocity impulses, integration, then the
    /// split-impulse positional pass.
    pub fn step(&mut self, cfg: &SimConfig) -> Result<StepRecord, SimError> {
        let dt = cfg.dt;
        let object = self.object_index();

        // gravity
        for b in self.bodies.iter_mut() {
            if b.inv_mass > 0.0 {
                b.lin_vel += cfg.gravity * (b.gravity_scale * dt);
            }
        }

        // contact constraints
        let manifolds = self.detect(cfg.margin)?;
        let mut contacts: Vec<ContactConstraint> = Vec::new();
        for m in &manifolds {
            for p in &m.points {
                contacts.push(self.prepare_contact(m.body_a, m.body_b, p, cfg));
            }
        }

        // joint data
        let mut joints: Vec<JointData> = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            joints.push(self.prepare_joint(j, cfg));
        }
        let mut motor_state: Vec<(Vec3, Vec3, Vec3, Vec3)> = self
            .motors
            .iter()
            .map(|m| {
                let b = &self.bodies[m.body];
                let e_lin = m.target_pos - b.position;
                let e_ang = rotation_error(&b.orientation, &m.target_rot);
                (Vec3::zeros(), Vec3::zeros(), e_lin, e_ang)
            })
            .collect();

        // velocity iterations over disjoint field borrows
        let bodies = &mut self.bodies;
        for _ in 0..cfg.solver_iterations {
            for (mi, m) in self.motors.iter().enumerate() {
                let (ref mut z_lin, ref mut y_ang, e_lin, e_ang) = motor_state[mi];
                solve_world_motor(bodies, m, z_lin, y_ang, e_lin, e_ang, dt);
            }
            for (ji, j) in self.joints.iter().enumerate() {
                let jd = &mut joints[ji];
                solve_joint_motor(bodies, j, jd, dt);
                solve_ball_velocity(bodies, j, jd);
            }
            for c in contacts.iter_mut() {
                solve_contact_normal(bodies, c);
                solve_contact_friction(bodies, c, cfg.friction);
            }
        }

        // integrate
        for b in bodies.iter_mut() {
            if b.inv_mass == 0.0 {
                continue;
            }
            b.position += b.lin_vel * dt;
            b.orientation = Quat::from_scaled_axis(b.ang_vel * dt) * b.orientation;
            b.orientation.renormalize_fast();
        }

        // split-impulse positional correction: moves positions only
        for _ in 0..cfg.position_iterations {
            for j in &self.joints {
                correct_joint_position(bodies, j, cfg);
            }
            for c in &contacts {
                correct_contact_position(bodies, c, cfg);
            }
        }

        // divergence guard
        for b in bodies.iter() {
            let speed = b.lin_vel.norm();
            if !speed.is_finite() || speed > cfg.max_velocity {
                return Err(SimError::Divergence(speed));
            }
        }

        // record
        let mut rec = StepRecord::default();
        for c in &contacts {
            let impulse = c.normal * c.jn + c.t1 * c.jt1 + c.t2 * c.jt2;
            rec.impulse_audit.push((c.jn, (c.t1 * c.jt1 + c.t2 * c.jt2).norm()));
            rec.contacts.push(ContactImpulse {
                position: c.position,
                normal: c.normal,
                impulse,
                body_a: c.a,
                body_b: c.b,
            });
            if let Some(obj) = object {
                let (signed, r) = if c.b == obj {
                    (impulse, c.r_b)
                } else if c.a == obj {
                    (-impulse, c.r_a)
                } else {
                    continue;
                };
                rec.object_impulse += signed;
                rec.object_torque_impulse += r.cross(&signed);
                if c.jn > 0.0 {
                    rec.contact_count += 1;
                }
            }
        }
        Ok(rec)
    }

    fn prepare_contact(
        &self,
        a: usize,
        b: usize,
        p: &crate::contact::ContactPoint,
        cfg: &SimConfig,
    ) -> ContactConstraint {
        let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
        let r_a = p.position - ba.position;
        let r_b = p.position - bb.position;
        let n = p.normal;
        let t1 = orthogonal(n);
        let t2 = n.cross(&t1);
        let ia = ba.inv_inertia_world();
        let ib = bb.inv_inertia_world();
        let k = |dir: Vec3| {
            ba.inv_mass
                + bb.inv_mass
                + dir.dot(&((ia * r_a.cross(&dir)).cross(&r_a) + (ib * r_b.cross(&dir)).cross(&r_b)))
        };
        // approach velocity before solving, for restitution
        let v_n = (bb.velocity_at(r_b) - ba.velocity_at(r_a)).dot(&n);
        let mut bias = 0.0;
        if p.depth >= 0.0 {
            if v_n < -cfg.restitution_threshold {
                bias = -cfg.restitution * v_n;
            }
        } else {
            // speculative: allow closing the remaining gap this step
            bias = p.depth / cfg.dt;
        }
        ContactConstraint {
            a,
            b,
            r_a,
            r_b,
            r_a_local: ba.orientation.inverse() * r_a,
            r_b_local: bb.orientation.inverse() * r_b,
            normal: n,
            t1,
            t2,
            depth: p.depth,
            k_n: k(n),
            k_t1: k(t1),
            k_t2: k(t2),
            bias,
            jn: 0.0,
            jt1: 0.0,
            jt2: 0.0,
            position: p.position,
        }
    }

    fn prepare_joint(&self, j: &BallJoint, cfg: &SimConfig) -> JointData {
        let bp = &self.bodies[j.parent];
        let bc = &self.bodies[j.child];
        let r_p = bp.orientation * j.anchor_parent;
        let r_c = bc.orientation * j.anchor_child;
        let ia = bp.inv_inertia_world();
        let ib = bc.inv_inertia_world();
        let k = Mat3::identity() * (bp.inv_mass + bc.inv_mass) - skew(r_p) * ia * skew(r_p)
            - skew(r_c) * ib * skew(r_c);
        let target_world = bp.orientation * j.target_rel;
        let error_vec = rotation_error(&bc.orientation, &target_world);
        JointData {
            k_inv: k.try_inverse().unwrap_or_else(Mat3::zeros),
            r_p,
            r_c,
            motor_y: Vec3::zeros(),
            c_soft: cfg.dt * (cfg.dt * j.kp + j.kd),
            error_vec,
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies
            .iter()
            .filter(|b| b.inv_mass > 0.0)
            .map(|b| {
                let r = b.orientation.to_rotation_matrix();
                let inertia_world = r * b.inertia_local * r.transpose();
                0.5 / b.inv_mass * b.lin_vel.norm_squared()
                    + 0.5 * b.ang_vel.dot(&(inertia_world * b.ang_vel))
            })
            .sum()
    }
}

fn apply_impulse(bodies: &mut [Body], body: usize, at: Vec3, impulse: Vec3) {
    let b = &mut bodies[body];
    if b.inv_mass == 0.0 {
        return;
    }
    let iw = b.inv_inertia_world();
    b.lin_vel += impulse * b.inv_mass;
    b.ang_vel += iw * at.cross(&impulse);
}

fn apply_angular_impulse(bodies: &mut [Body], body: usize, impulse: Vec3) {
    let b = &mut bodies[body];
    if b.inv_mass == 0.0 {
        return;
    }
    let iw = b.inv_inertia_world();
    b.ang_vel += iw * impulse;
}

/// Pseudo-impulse applied to positions only (no kinetic energy change).
fn apply_positional(bodies: &mut [Body], body: usize, r: Vec3, impulse: Vec3) {
    let b = &mut bodies[body];
    if b.inv_mass == 0.0 {
        return;
    }
    let iw = b.inv_inertia_world();
    b.position += impulse * b.inv_mass;
    let dtheta = iw * r.cross(&impulse);
    b.orientation = Quat::from_scaled_axis(dtheta) * b.orientation;
    b.orientation.renormalize_fast();
}

fn solve_world_motor(
    bodies: &mut [Body],
    m: &WorldMotor,
    z_lin: &mut Vec3,
    y_ang: &mut Vec3,
    e_lin: Vec3,
    e_ang: Vec3,
    dt: f64,
) {
    let body = m.body;
    // linear: implicit spring toward the target position
    let c = dt * (dt * m.kp_lin + m.kd_lin);
    if c > 0.0 {
        let inv_m = bodies[body].inv_mass;
        let v = bodies[body].lin_vel;
        let residual = v + *z_lin / c - e_lin * (dt * m.kp_lin / c);
        let dz = -residual / (inv_m + 1.0 / c);
        let z_new = clamp_norm(*z_lin + dz, m.max_force * dt);
        let delta = z_new - *z_lin;
        *z_lin = z_new;
        let b = &mut bodies[body];
        b.lin_vel += delta * b.inv_mass;
    }
    // angular: same structure about the orientation error
    let c_ang = dt * (dt * m.kp_ang + m.kd_ang);
    if c_ang > 0.0 {
        let iw = bodies[body].inv_inertia_world();
        let w = bodies[body].ang_vel;
        let residual = w + *y_ang / c_ang - e_ang * (dt * m.kp_ang / c_ang);
        let k = iw + Mat3::identity() / c_ang;
        let dy = -k.try_inverse().unwrap_or_else(Mat3::zeros) * residual;
        let y_new = clamp_norm(*y_ang + dy, m.max_torque * dt);
        let delta = y_new - *y_ang;
        *y_ang = y_new;
        apply_angular_impulse(bodies, body, delta);
    }
}

fn solve_joint_motor(bodies: &mut [Body], j: &BallJoint, jd: &mut JointData, dt: f64) {
    if jd.c_soft <= 0.0 {
        return;
    }
    let w_rel = bodies[j.child].ang_vel - bodies[j.parent].ang_vel;
    let k_ang = bodies[j.parent].inv_inertia_world() + bodies[j.child].inv_inertia_world();
    let residual = w_rel + jd.motor_y / jd.c_soft - jd.error_vec * (dt * j.kp / jd.c_soft);
    let k = k_ang + Mat3::identity() / jd.c_soft;
    let dy = -k.try_inverse().unwrap_or_else(Mat3::zeros) * residual;
    let y_new = clamp_norm(jd.motor_y + dy, j.max_torque * dt);
    let delta = y_new - jd.motor_y;
    jd.motor_y = y_new;
    apply_angular_impulse(bodies, j.child, delta);
    apply_angular_impulse(bodies, j.parent, -delta);
}

fn solve_ball_velocity(bodies: &mut [Body], j: &BallJoint, jd: &JointData) {
    let v_rel = bodies[j.child].velocity_at(jd.r_c) - bodies[j.parent].velocity_at(jd.r_p);
    let p = jd.k_inv * (-v_rel);
    apply_impulse(bodies, j.child, jd.r_c, p);
    apply_impulse(bodies, j.parent, jd.r_p, -p);
}

fn solve_contact_normal(bodies: &mut [Body], c: &mut ContactConstraint) {
    let v_n =
        (bodies[c.b].velocity_at(c.r_b) - bodies[c.a].velocity_at(c.r_a)).dot(&c.normal);
    let delta = (c.bias - v_n) / c.k_n;
    let jn_new = (c.jn + delta).max(0.0);
    let applied = jn_new - c.jn;
    c.jn = jn_new;
    let p = c.normal * applied;
    apply_impulse(bodies, c.b, c.r_b, p);
    apply_impulse(bodies, c.a, c.r_a, -p);
}

fn solve_contact_friction(bodies: &mut [Body], c: &mut ContactConstraint, mu: f64) {
    let rel = bodies[c.b].velocity_at(c.r_b) - bodies[c.a].velocity_at(c.r_a);
    let d1 = -rel.dot(&c.t1) / c.k_t1;
    c.jt1 += d1;
    let p1 = c.t1 * d1;
    apply_impulse(bodies, c.b, c.r_b, p1);
    apply_impulse(bodies, c.a, c.r_a, -p1);

    let rel = bodies[c.b].velocity_at(c.r_b) - bodies[c.a].velocity_at(c.r_a);
    let d2 = -rel.dot(&c.t2) / c.k_t2;
    c.jt2 += d2;
    let p2 = c.t2 * d2;
    apply_impulse(bodies, c.b, c.r_b, p2);
    apply_impulse(bodies, c.a, c.r_a, -p2);

    // project the accumulated tangential impulse onto the friction cone
    let cap = mu * c.jn;
    let norm = (c.jt1 * c.jt1 + c.jt2 * c.jt2).sqrt();
    if norm > cap {
        let scale = if norm > 0.0 { cap / norm } else { 0.0 };
        let new1 = c.jt1 * scale;
        let new2 = c.jt2 * scale;
        let corr = c.t1 * (new1 - c.jt1) + c.t2 * (new2 - c.jt2);
        c.jt1 = new1;
        c.jt2 = new2;
        apply_impulse(bodies, c.b, c.r_b, corr);
        apply_impulse(bodies, c.a, c.r_a, -corr);
    }
}

fn correct_joint_position(bodies: &mut [Body], j: &BallJoint, cfg: &SimConfig) {
    let bp = &bodies[j.parent];
    let bc = &bodies[j.child];
    let r_p = bp.orientation * j.anchor_parent;
    let r_c = bc.orientation * j.anchor_child;
    let err = (bc.position + r_c) - (bp.position + r_p);
    if err.norm_squared() < 1e-24 {
        return;
    }
    let ia = bp.inv_inertia_world();
    let ib = bc.inv_inertia_world();
    let k = Mat3::identity() * (bp.inv_mass + bc.inv_mass)
        - skew(r_p) * ia * skew(r_p)
        - skew(r_c) * ib * skew(r_c);
    let p = k.try_inverse().unwrap_or_else(Mat3::zeros) * (-err * cfg.baumgarte);
    apply_positional(bodies, j.child, r_c, p);
    apply_positional(bodies, j.parent, r_p, -p);
}

fn correct_contact_position(bodies: &mut [Body], c: &ContactConstraint, cfg: &SimConfig) {
    let ba = &bodies[c.a];
    let bb = &bodies[c.b];
    let p_a = ba.position + ba.orientation * c.r_a_local;
    let p_b = bb.position + bb.orientation * c.r_b_local;
    // current penetration along the stored normal
    let pen = c.depth - (p_b - p_a + (c.r_a - c.r_b)).dot(&c.normal);
    let excess = pen - cfg.slop;
    if excess <= 0.0 {
        return;
    }
    let push = cfg.baumgarte * excess / c.k_n;
    let p = c.normal * push;
    let rb = bb.orientation * c.r_b_local;
    let ra = ba.orientation * c.r_a_local;
    apply_positional(bodies, c.b, rb, p);
    apply_positional(bodies, c.a, ra, -p);
}

fn orthogonal(n: Vec3) -> Vec3 {
    let t = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    (t - n * t.dot(&n)).normalize()
}

fn skew(v: Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max && n > 0.0 {
        v * (max / n)
    } else {
        v
    }
}

/// World-frame rotation carrying `current` onto `target`, as a scaled axis.
fn rotation_error(current: &Quat, target: &Quat) -> Vec3 {
    (target * current.inverse()).scaled_axis()
}
