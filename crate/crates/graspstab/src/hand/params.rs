//! Shape and pose parameterization: per-link radii deltas, per-link
//! rotation deltas in axis-angle or intrinsic-XYZ Euler form, the full
//! (48) and reduced (23) flat DoF layouts, and joint limits.

use super::{HandError, HandTemplate, FINGER_NAMES, NUM_LINKS};
use crate::{Rot3, Vec3};
use serde::{Deserialize, Serialize};

/// Flat pose vector length for the full layout: 45 local + 3 root.
pub const DOFS_FULL: usize = 48;
/// Flat pose vector length for the reduced layout: 20 local + 3 root.
pub const DOFS_REDUCED: usize = 23;

/// Per-link radii deltas (m, additive to the template radii).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub deltas: Vec<[f64; 3]>,
}

impl ShapeParams {
    pub fn zeros() -> Self {
        Self { deltas: vec![[0.0; 3]; NUM_LINKS] }
    }

    pub fn delta(&self, link: usize) -> Vec3 {
        Vec3::from(self.deltas[link])
    }
}

/// How a per-link 3-vector encodes a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRep {
    AxisAngle,
    /// Intrinsic rotations about X, then the new Y, then the new Z:
    /// `R = Rx(a) * Ry(b) * Rz(c)`. X is the bone twist axis, Y the
    /// abduction axis, Z the flexion axis.
    EulerXyz,
}

/// Per-link rotation deltas with respect to each link's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    pub rep: AngleRep,
    pub deltas: Vec<[f64; 3]>,
}

impl PoseParams {
    pub fn zeros() -> Self {
        Self { rep: AngleRep::AxisAngle, deltas: vec![[0.0; 3]; NUM_LINKS] }
    }

    pub fn link_rotation(&self, link: usize) -> Rot3 {
        let v = Vec3::from(self.deltas[link]);
        match self.rep {
            AngleRep::AxisAngle => Rot3::from_scaled_axis(v),
            AngleRep::EulerXyz => euler_to_rotation(v),
        }
    }
}

/// Object parameters relative to the posed palm ellipsoid: radii delta,
/// orientation delta, and center offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub radii_delta: [f64; 3],
    pub axis_angle: [f64; 3],
    pub center_offset: [f64; 3],
}

impl ObjectParams {
    pub fn zeros() -> Self {
        Self { radii_delta: [0.0; 3], axis_angle: [0.0; 3], center_offset: [0.0; 3] }
    }

    /// An object parked 10 m away; handy for hand-only evaluations.
    pub fn far_away() -> Self {
        Self { radii_delta: [0.0; 3], axis_angle: [0.0; 3], center_offset: [0.0, 10.0, 0.0] }
    }
}

/// Which flat DoF layout a pose vector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofLayout {
    Full,
    Reduced,
}

impl DofLayout {
    pub fn len(&self) -> usize {
        match self {
            DofLayout::Full => DOFS_FULL,
            DofLayout::Reduced => DOFS_REDUCED,
        }
    }
}

/// A flat pose vector in Euler representation, tagged with its layout.
/// Layout of the full vector: root Euler triple, then 15 link triples
/// (twist, abduction, flexion) in link order. Layout of the reduced vector:
/// root triple, then per finger MCP flexion, MCP abduction, PIP flexion,
/// DIP flexion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vartheta {
    pub layout: DofLayout,
    pub values: Vec<f64>,
}

impl Vartheta {
    pub fn zeros(layout: DofLayout) -> Self {
        Self { layout, values: vec![0.0; layout.len()] }
    }

    pub fn new(layout: DofLayout, values: Vec<f64>) -> Result<Self, HandError> {
        if values.len() != layout.len() {
            return Err(HandError::DofLength { expected: layout.len(), got: values.len() });
        }
        Ok(Self { layout, values })
    }

    /// Expands to the 48-vector regardless of layout.
    pub fn full_values(&self) -> Vec<f64> {
        match self.layout {
            DofLayout::Full => self.values.clone(),
            DofLayout::Reduced => expand_dofs(&self.values),
        }
    }

    /// Per-link Euler pose for forward kinematics.
    pub fn to_pose(&self) -> PoseParams {
        let full = self.full_values();
        let mut deltas = vec![[0.0; 3]; NUM_LINKS];
        deltas[0] = [full[0], full[1], full[2]];
        for link in 1..NUM_LINKS {
            let base = 3 * link;
            deltas[link] = [full[base], full[base + 1], full[base + 2]];
        }
        PoseParams { rep: AngleRep::EulerXyz, deltas }
    }

    /// Flattens per-link Euler params into this layout.
    pub fn from_pose(pose: &PoseParams, layout: DofLayout) -> Result<Self, HandError> {
        let euler = match pose.rep {
            AngleRep::EulerXyz => pose.clone(),
            AngleRep::AxisAngle => axis_angle_to_euler(pose)?,
        };
        let mut full = vec![0.0; DOFS_FULL];
        full[..3].copy_from_slice(&euler.deltas[0]);
        for link in 1..NUM_LINKS {
            full[3 * link..3 * link + 3].copy_from_slice(&euler.deltas[link]);
        }
        let values = match layout {
            DofLayout::Full => full,
            DofLayout::Reduced => reduce_dofs(&full),
        };
        Ok(Self { layout, values })
    }
}

pub fn euler_to_rotation(e: Vec3) -> Rot3 {
    Rot3::from_axis_angle(&Vec3::x_axis(), e.x)
        * Rot3::from_axis_angle(&Vec3::y_axis(), e.y)
        * Rot3::from_axis_angle(&Vec3::z_axis(), e.z)
}

/// Extracts intrinsic-XYZ Euler angles. Errors within 1e-6 rad of the
/// gimbal-lock pitch of +/- pi/2.
pub fn rotation_to_euler(r: &Rot3) -> Result<Vec3, HandError> {
    let m = r.matrix();
    let sb = m[(0, 2)].clamp(-1.0, 1.0);
    let b = sb.asin();
    if std::f64::consts::FRAC_PI_2 - b.abs() < 1e-6 {
        return Err(HandError::GimbalLock(b));
    }
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    Ok(Vec3::new(a, b, c))
}

/// Saturating variant for mid-simulation readout: clamps into the valid
/// range instead of failing at gimbal lock.
pub fn rotation_to_euler_saturating(r: &Rot3) -> Vec3 {
    match rotation_to_euler(r) {
        Ok(e) => e,
        Err(_) => {
            let m = r.matrix();
            let sb = m[(0, 2)].clamp(-1.0, 1.0);
            let b = sb.asin();
            // at lock, twist and flexion share an axis; attribute it to flexion
            let c = m[(1, 0)].atan2(m[(1, 1)]);
            Vec3::new(0.0, b, if sb > 0.0 { c } else { -c })
        }
    }
}

/// Converts per-link axis-angle deltas to Euler deltas.
pub fn axis_angle_to_euler(theta: &PoseParams) -> Result<PoseParams, HandError> {
    match theta.rep {
        AngleRep::EulerXyz => Ok(theta.clone()),
        AngleRep::AxisAngle => {
            let mut deltas = Vec::with_capacity(theta.deltas.len());
            for d in &theta.deltas {
                let rot = Rot3::from_scaled_axis(Vec3::from(*d));
                deltas.push(rotation_to_euler(&rot)?.into());
            }
            Ok(PoseParams { rep: AngleRep::EulerXyz, deltas })
        }
    }
}

/// Converts per-link Euler deltas to axis-angle deltas.
pub fn euler_to_axis_angle(theta: &PoseParams) -> PoseParams {
    match theta.rep {
        AngleRep::AxisAngle => theta.clone(),
        AngleRep::EulerXyz => PoseParams {
            rep: AngleRep::AxisAngle,
            deltas: theta
                .deltas
                .iter()
                .map(|d| euler_to_rotation(Vec3::from(*d)).scaled_axis().into())
                .collect(),
        },
    }
}

/// Index of a reduced DoF inside the full 48-vector.
fn reduced_to_full_index(k: usize) -> usize {
    if k < 3 {
        return k; // root
    }
    let finger = (k - 3) / 4;
    let prox = HandTemplate::link_index(finger, 0);
    match (k - 3) % 4 {
        0 => 3 * prox + 2,       // MCP flexion
        1 => 3 * prox + 1,       // MCP abduction
        2 => 3 * (prox + 1) + 2, // PIP flexion
        _ => 3 * (prox + 2) + 2, // DIP flexion
    }
}

/// Projects a 48-vector onto the 20 physically plausible local DoFs plus
/// the 3 root scalars.
pub fn reduce_dofs(full: &[f64]) -> Vec<f64> {
    assert_eq!(full.len(), DOFS_FULL);
    (0..DOFS_REDUCED).map(|k| full[reduced_to_full_index(k)]).collect()
}

/// Zero-fills the dropped axes of a reduced vector.
pub fn expand_dofs(reduced: &[f64]) -> Vec<f64> {
    assert_eq!(reduced.len(), DOFS_REDUCED);
    let mut full = vec![0.0; DOFS_FULL];
    for (k, &v) in reduced.iter().enumerate() {
        full[reduced_to_full_index(k)] = v;
    }
    full
}

/// Closed limit intervals for the reduced DoFs. Root scalars and (in the
/// full layout) twist axes are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub flexion: [f64; 2],
    pub abduction: [f64; 2],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self { flexion: [-0.26, 1.75], abduction: [-0.35, 0.35] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Root,
    Twist,
    Abduction,
    Flexion,
}

impl JointLimits {
    /// Limit interval for component `k` of a flat vector in `layout`.
    pub fn interval(&self, layout: DofLayout, k: usize) -> Option<[f64; 2]> {
        match dof_kind(layout, k) {
            DofKind::Flexion => Some(self.flexion),
            DofKind::Abduction => Some(self.abduction),
            DofKind::Root | DofKind::Twist => None,
        }
    }
}

pub fn dof_kind(layout: DofLayout, k: usize) -> DofKind {
    match layout {
        DofLayout::Reduced => {
            if k < 3 {
                DofKind::Root
            } else {
                match (k - 3) % 4 {
                    1 => DofKind::Abduction,
                    _ => DofKind::Flexion,
                }
            }
        }
        DofLayout::Full => {
            if k < 3 {
                DofKind::Root
            } else {
                match k % 3 {
                    0 => DofKind::Twist,
                    1 => DofKind::Abduction,
                    _ => DofKind::Flexion,
                }
            }
        }
    }
}

pub fn dof_name(layout: DofLayout, k: usize) -> String {
    match layout {
        DofLayout::Reduced => {
            if k < 3 {
                format!("root_{}", ["x", "y", "z"][k])
            } else {
                let finger = FINGER_NAMES[(k - 3) / 4];
                let part = ["mcp_flexion", "mcp_abduction", "pip_flexion", "dip_flexion"]
                    [(k - 3) % 4];
                format!("{finger}_{part}")
            }
        }
        DofLayout::Full => {
            if k < 3 {
                format!("root_{}", ["x", "y", "z"][k])
            } else {
                let link = k / 3;
                let axis = ["twist", "abduction", "flexion"][k % 3];
                format!("{}_{axis}", super::LINK_NAMES[link])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofViolation {
    pub index: usize,
    pub name: String,
    pub value: f64,
    pub limits: [f64; 2],
}

/// Empty iff every limited DoF lies inside its closed limit interval.
pub fn validate_pose(vartheta: &Vartheta, limits: &JointLimits) -> Vec<DofViolation> {
    let mut out = Vec::new();
    for (k, &v) in vartheta.values.iter().enumerate() {
        if let Some([lo, hi]) = limits.interval(vartheta.layout, k) {
            if v < lo || v > hi {
                out.push(DofViolation {
                    index: k,
                    name: dof_name(vartheta.layout, k),
                    value: v,
                    limits: [lo, hi],
                });
            }
        }
    }
    out
}

/// Clamps every limited DoF into its interval, returning how many moved.
pub fn clamp_pose(values: &mut [f64], layout: DofLayout, limits: &JointLimits) -> usize {
    let mut clamped = 0;
    for (k, v) in values.iter_mut().enumerate() {
        if let Some([lo, hi]) = limits.interval(layout, k) {
            let c = v.clamp(lo, hi);
            if c != *v {
                *v = c;
                clamped += 1;
            }
        }
    }
    clamped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::NUM_FINGERS;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn euler_single_axis() {
        let e = rotation_to_euler(&Rot3::from_scaled_axis(Vec3::new(0.0, 0.0, PI / 2.0))).unwrap();
        assert_abs_diff_eq!((e - Vec3::new(0.0, 0.0, PI / 2.0)).norm(), 0.0, epsilon = 1e-12);
        let z = rotation_to_euler(&Rot3::identity()).unwrap();
        assert_abs_diff_eq!(z.norm(), 0.0);
    }

    #[test]
    fn euler_roundtrip_random() {
        let mut rng = crate::test_rng(31);
        for _ in 0..500 {
            let e = Vec3::new(
                rand::Rng::random_range(&mut rng, -1.4..1.4),
                rand::Rng::random_range(&mut rng, -1.4..1.4),
                rand::Rng::random_range(&mut rng, -1.4..1.4),
            );
            let back = rotation_to_euler(&euler_to_rotation(e)).unwrap();
            assert_abs_diff_eq!((back - e).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_errors() {
        let r = euler_to_rotation(Vec3::new(0.3, PI / 2.0, 0.1));
        assert!(matches!(rotation_to_euler(&r), Err(HandError::GimbalLock(_))));
        let near = euler_to_rotation(Vec3::new(0.0, PI / 2.0 - 1e-8, 0.0));
        assert!(rotation_to_euler(&near).is_err());
        let ok = euler_to_rotation(Vec3::new(0.0, PI / 2.0 - 1e-3, 0.0));
        assert!(rotation_to_euler(&ok).is_ok());
    }

    #[test]
    fn pose_conversion_roundtrip() {
        let mut rng = crate::test_rng(32);
        let mut pose = PoseParams::zeros();
        for d in pose.deltas.iter_mut() {
            *d = (crate::rand_vec3(&mut rng, 0.7)).into();
        }
        let euler = axis_angle_to_euler(&pose).unwrap();
        let back = euler_to_axis_angle(&euler);
        for (a, b) in pose.deltas.iter().zip(&back.deltas) {
            assert!((Vec3::from(*a) - Vec3::from(*b)).norm() < 1e-9);
        }
    }

    #[test]
    fn dof_sizes() {
        assert_eq!(DOFS_FULL, 48);
        assert_eq!(DOFS_REDUCED, 23);
        assert_eq!(DofLayout::Full.len(), 48);
        assert_eq!(DofLayout::Reduced.len(), 23);
    }

    #[test]
    fn reduce_expand_zero() {
        let zero = vec![0.0; DOFS_FULL];
        assert_eq!(reduce_dofs(&zero), vec![0.0; DOFS_REDUCED]);
        assert_eq!(expand_dofs(&vec![0.0; DOFS_REDUCED]), zero);
    }

    #[test]
    fn reduce_is_left_inverse_of_expand() {
        let mut rng = crate::test_rng(33);
        for _ in 0..50 {
            let reduced: Vec<f64> = (0..DOFS_REDUCED)
                .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
                .collect();
            assert_eq!(reduce_dofs(&expand_dofs(&reduced)), reduced);
        }
    }

    #[test]
    fn in_manifold_poses_survive_roundtrip() {
        // PIP flexions only
        let mut full = vec![0.0; DOFS_FULL];
        for f in 0..NUM_FINGERS {
            let pip = HandTemplate::link_index(f, 1);
            full[3 * pip + 2] = 0.1 * (f as f64 + 1.0);
        }
        assert_eq!(expand_dofs(&reduce_dofs(&full)), full);
    }

    #[test]
    fn twist_is_projected_away() {
        let mut full = vec![0.0; DOFS_FULL];
        let mid = HandTemplate::link_index(2, 1);
        full[3 * mid] = 0.7; // twist on middle finger's middle link
        let round = expand_dofs(&reduce_dofs(&full));
        assert_eq!(round[3 * mid], 0.0);
        let mut diff = 0;
        for k in 0..DOFS_FULL {
            if round[k] != full[k] {
                diff += 1;
                assert_eq!(k, 3 * mid);
            }
        }
        assert_eq!(diff, 1);
    }

    #[test]
    fn validate_pose_limits() {
        let limits = JointLimits::default();
        let rest = Vartheta::zeros(DofLayout::Reduced);
        assert!(validate_pose(&rest, &limits).is_empty());

        let mut v = Vartheta::zeros(DofLayout::Reduced);
        v.values[3 + 4 + 2] = 3.0; // index PIP flexion
        let viol = validate_pose(&v, &limits);
        assert_eq!(viol.len(), 1);
        assert_eq!(viol[0].name, "index_pip_flexion");

        let mut b = Vartheta::zeros(DofLayout::Reduced);
        b.values[3] = 1.75; // boundary is inside the closed interval
        b.values[4] = -0.35;
        assert!(validate_pose(&b, &limits).is_empty());

        // root is unbounded
        let mut r = Vartheta::zeros(DofLayout::Reduced);
        r.values[0] = 9.0;
        assert!(validate_pose(&r, &limits).is_empty());
    }

    #[test]
    fn clamp_counts_match_violations() {
        let limits = JointLimits::default();
        let mut rng = crate::test_rng(35);
        for _ in 0..50 {
            let values: Vec<f64> = (0..DOFS_REDUCED)
                .map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0))
                .collect();
            let v = Vartheta::new(DofLayout::Reduced, values.clone()).unwrap();
            let nviol = validate_pose(&v, &limits).len();
            let mut clamped = values;
            let n = clamp_pose(&mut clamped, DofLayout::Reduced, &limits);
            assert_eq!(n, nviol);
            let cv = Vartheta::new(DofLayout::Reduced, clamped).unwrap();
            assert!(validate_pose(&cv, &limits).is_empty());
        }
    }
}
