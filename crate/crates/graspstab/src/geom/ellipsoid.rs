//! The implicit ellipsoid primitive: the zero isosurface of a quadratic
//! form `(x - c)^T A (x - c) - 1` with `A = R diag(r)^-2 R^T`.

use super::GeomError;
use crate::{Rot3, Vec3};
use serde::{Deserialize, Serialize};

/// Number of surface samples in the fixed evaluation pattern.
pub const SAMPLE_PATTERN_SIZE: usize = 872;

/// One ellipsoid: center, semi-axis radii, and orientation as an axis-angle
/// vector. The rotation maps the ellipsoid's local frame to world, so the
/// world direction of the i-th principal axis is column i of `rotation()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
    pub axis_angle: [f64; 3],
}

impl Ellipsoid {
    pub fn new(center: Vec3, radii: Vec3, axis_angle: Vec3) -> Result<Self, GeomError> {
        if !(center.iter().all(|v| v.is_finite()) && axis_angle.iter().all(|v| v.is_finite())) {
            return Err(GeomError::NonFinite("ellipsoid center/orientation"));
        }
        if !radii.iter().all(|r| r.is_finite() && *r > 0.0) {
            return Err(GeomError::InvalidRadii(radii.into()));
        }
        Ok(Self {
            center: center.into(),
            radii: radii.into(),
            axis_angle: axis_angle.into(),
        })
    }

    /// Sphere of radius `r` at `center`.
    pub fn sphere(center: Vec3, r: f64) -> Result<Self, GeomError> {
        Self::new(center, Vec3::new(r, r, r), Vec3::zeros())
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    pub fn radii(&self) -> Vec3 {
        Vec3::from(self.radii)
    }

    pub fn axis_angle(&self) -> Vec3 {
        Vec3::from(self.axis_angle)
    }

    /// Local-to-world rotation.
    pub fn rotation(&self) -> Rot3 {
        Rot3::from_scaled_axis(self.axis_angle())
    }

    /// Quadratic form value: negative inside, zero on the surface, positive
    /// outside; exactly -1 at the center.
    pub fn implicit_value(&self, x: Vec3) -> Result<f64, GeomError> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite("implicit_value probe point"));
        }
        Ok(self.implicit_value_unchecked(x))
    }

    #[inline]
    pub(crate) fn implicit_value_unchecked(&self, x: Vec3) -> f64 {
        let d = self.rotation().inverse() * (x - self.center());
        let r = self.radii();
        let u = Vec3::new(d.x / r.x, d.y / r.y, d.z / r.z);
        u.dot(&u) - 1.0
    }

    /// Point of the surface with the largest projection on `dir`.
    pub fn support_point(&self, dir: Vec3) -> Result<Vec3, GeomError> {
        let n = dir.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(GeomError::ZeroDirection);
        }
        Ok(self.support_point_unchecked(dir / n))
    }

    #[inline]
    pub(crate) fn support_point_unchecked(&self, dir: Vec3) -> Vec3 {
        let rot = self.rotation();
        let r = self.radii();
        let local = rot.inverse() * dir;
        let u = Vec3::new(r.x * local.x, r.y * local.y, r.z * local.z);
        let u = u / u.norm();
        self.center() + rot * Vec3::new(r.x * u.x, r.y * u.y, r.z * u.z)
    }

    /// Canonical re-decomposition: radii sorted descending and, among the
    /// rotations that leave the implicit function unchanged, the one whose
    /// axis-angle vector is lexicographically smallest. Spheres map to zero
    /// rotation. Idempotent.
    pub fn canonicalize(&self) -> Ellipsoid {
        let r = self.radii();
        if r.x == r.y && r.y == r.z {
            return Ellipsoid {
                center: self.center,
                radii: self.radii,
                axis_angle: [0.0; 3],
            };
        }
        let rot = self.rotation();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| r[b].partial_cmp(&r[a]).unwrap().then(a.cmp(&b)));
        let sorted = Vec3::new(r[order[0]], r[order[1]], r[order[2]]);
        let mut axes = [
            rot.matrix().column(order[0]).into_owned(),
            rot.matrix().column(order[1]).into_owned(),
            rot.matrix().column(order[2]).into_owned(),
        ];
        let det_flipped = axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0;
        if det_flipped {
            axes[2] = -axes[2];
        }
        // The 180-degree symmetries of the ellipsoid: flip any two axes.
        let signs: [[f64; 3]; 4] = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        let mut best: Option<(Vec3, usize)> = None;
        for (si, s) in signs.iter().enumerate() {
            let m = nalgebra::Matrix3::from_columns(&[
                axes[0] * s[0],
                axes[1] * s[1],
                axes[2] * s[2],
            ]);
            let aa = axis_angle_of(&Rot3::from_matrix_unchecked(m));
            match best {
                Some((b, _)) if lex_cmp(&b, &aa) != std::cmp::Ordering::Greater => {}
                _ => best = Some((aa, si)),
            }
        }
        let (aa, si) = best.unwrap();
        // already canonical: keep the input bits rather than the matrix
        // roundtrip, so the operation is exactly idempotent
        if order == [0, 1, 2] && !det_flipped && si == 0 {
            return *self;
        }
        Ellipsoid {
            center: self.center,
            radii: sorted.into(),
            axis_angle: aa.into(),
        }
    }

    /// `n` deterministic surface points, approximately uniform by area.
    /// `n = 4` yields a regular tetrahedron mapped to the surface; larger
    /// counts use a fixed Fibonacci lattice on the unit sphere.
    pub fn sample_surface(&self, n: usize) -> Vec<Vec3> {
        assert!(n >= 4, "sample_surface needs n >= 4");
        let rot = self.rotation();
        let r = self.radii();
        let c = self.center();
        unit_sphere_pattern(n)
            .into_iter()
            .map(|u| c + rot * Vec3::new(r.x * u.x, r.y * u.y, r.z * u.z))
            .collect()
    }

    /// Axis-aligned bounds in world coordinates.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let m = self.rotation();
        let r = self.radii();
        let mut half = Vec3::zeros();
        for k in 0..3 {
            let row = m.matrix().row(k);
            half[k] = (row[0] * r.x).hypot(row[1] * r.y).hypot(row[2] * r.z);
        }
        (self.center() - half, self.center() + half)
    }

    pub fn volume(&self) -> f64 {
        let r = self.radii();
        4.0 / 3.0 * std::f64::consts::PI * r.x * r.y * r.z
    }

    /// Solid-ellipsoid inertia tensor in the local frame for the given mass.
    pub fn unit_inertia(&self, mass: f64) -> crate::Mat3 {
        let r = self.radii();
        crate::Mat3::from_diagonal(&Vec3::new(
            mass / 5.0 * (r.y * r.y + r.z * r.z),
            mass / 5.0 * (r.x * r.x + r.z * r.z),
            mass / 5.0 * (r.x * r.x + r.y * r.y),
        ))
    }
}

/// Axis-angle of a rotation with a deterministic sign choice at angle pi,
/// where both `v` and `-v` represent the same rotation.
pub(crate) fn axis_angle_of(rot: &Rot3) -> Vec3 {
    let aa = rot.scaled_axis();
    let angle = aa.norm();
    if (angle - std::f64::consts::PI).abs() < 1e-12 {
        let neg = -aa;
        if lex_cmp(&neg, &aa) == std::cmp::Ordering::Less {
            return neg;
        }
    }
    aa
}

fn lex_cmp(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    for k in 0..3 {
        match a[k].partial_cmp(&b[k]).unwrap() {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Fixed unit-sphere sample pattern: a regular tetrahedron for `n = 4`,
/// otherwise a Fibonacci lattice. Deterministic in `n`.
pub fn unit_sphere_pattern(n: usize) -> Vec<Vec3> {
    if n == 4 {
        let s = 1.0 / 3f64.sqrt();
        return vec![
            Vec3::new(s, s, s),
            Vec3::new(s, -s, -s),
            Vec3::new(-s, s, -s),
            Vec3::new(-s, -s, s),
        ];
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            Vec3::new(rho * th.cos(), rho * th.sin(), z)
        })
        .collect()
}
