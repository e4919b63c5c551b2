//! Oriented bounding box fitting: PCA axes refined by a rotating-calipers
//! sweep over the dominant plane.

use super::ellipsoid::axis_angle_of;
use super::GeomError;
use crate::{Mat3, Rot3, Vec3};
use serde::{Deserialize, Serialize};

/// Oriented box: center, half extents along its axes, and orientation as an
/// axis-angle vector (local-to-world, same convention as [`super::Ellipsoid`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub axis_angle: [f64; 3],
}

impl Obb {
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    pub fn half_extents(&self) -> Vec3 {
        Vec3::from(self.half_extents)
    }

    pub fn rotation(&self) -> Rot3 {
        Rot3::from_scaled_axis(Vec3::from(self.axis_angle))
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let local = self.rotation().inverse() * (p - self.center());
        (0..3).all(|k| local[k].abs() <= self.half_extents[k] + tol)
    }
}

/// Fits an oriented box to a point set. The covariance eigenvectors give the
/// initial axes; the in-plane pair spanned by the two dominant eigenvectors
/// is refined with an exact minimum-area rectangle over the projected hull.
pub fn fit_obb(points: &[Vec3]) -> Result<Obb, GeomError> {
    if points.len() < 4 {
        return Err(GeomError::Degenerate(format!(
            "{} points, OBB fit needs at least 4",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean: Vec3 = points.iter().sum::<Vec3>() / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let scale2 = points.iter().map(|p| (p - mean).norm_squared()).fold(0.0, f64::max);
    if eig.eigenvalues[order[2]] < 1e-16 * scale2.max(1e-300) {
        return Err(GeomError::Degenerate("points are coplanar".into()));
    }
    let v1 = eig.eigenvectors.column(order[0]).into_owned();
    let v2 = eig.eigenvectors.column(order[1]).into_owned();
    let v3 = v1.cross(&v2);

    // minimum-area rectangle of the projection onto the dominant plane
    let proj: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p - mean).dot(&v1), (p - mean).dot(&v2)))
        .collect();
    let phi = min_area_rect_angle(&proj);
    let (c, s) = (phi.cos(), phi.sin());
    let w1 = v1 * c + v2 * s;
    let w2 = -v1 * s + v2 * c;
    let axes = [w1, w2, v3];

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            let t = (p - mean).dot(&axes[k]);
            lo[k] = lo[k].min(t);
            hi[k] = hi[k].max(t);
        }
    }
    let mut center = mean;
    let mut half = [0.0; 3];
    for k in 0..3 {
        center += axes[k] * (lo[k] + hi[k]) / 2.0;
        half[k] = (hi[k] - lo[k]) / 2.0;
    }
    if half.iter().any(|&h| h <= 0.0) {
        return Err(GeomError::Degenerate("flat point set".into()));
    }
    let m = Mat3::from_columns(&axes);
    let rot = if m.determinant() < 0.0 {
        Mat3::from_columns(&[axes[0], axes[1], -axes[2]])
    } else {
        m
    };
    Ok(Obb {
        center: center.into(),
        half_extents: half,
        axis_angle: axis_angle_of(&Rot3::from_matrix_unchecked(rot)).into(),
    })
}

/// Angle of the minimum-area axis-aligned rectangle over all rotations, via
/// the classic sweep over 2D hull edge directions.
fn min_area_rect_angle(pts: &[(f64, f64)]) -> f64 {
    let hull = hull_2d(pts);
    if hull.len() < 3 {
        return 0.0;
    }
    let mut best = (f64::INFINITY, 0.0f64);
    for i in 0..hull.len() {
        let (x0, y0) = hull[i];
        let (x1, y1) = hull[(i + 1) % hull.len()];
        let (ex, ey) = (x1 - x0, y1 - y0);
        let len = (ex * ex + ey * ey).sqrt();
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (ex / len, ey / len);
        let mut lo_u = f64::INFINITY;
        let mut hi_u = f64::NEG_INFINITY;
        let mut lo_v = f64::INFINITY;
        let mut hi_v = f64::NEG_INFINITY;
        for &(x, y) in &hull {
            let u = x * ux + y * uy;
            let v = -x * uy + y * ux;
            lo_u = lo_u.min(u);
            hi_u = hi_u.max(u);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        let area = (hi_u - lo_u) * (hi_v - lo_v);
        if area < best.0 {
            best = (area, uy.atan2(ux));
        }
    }
    best.1
}

/// Andrew's monotone chain.
fn hull_2d(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = pts.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
