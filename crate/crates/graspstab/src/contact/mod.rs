//! Convex collision queries between ellipsoids and convex hulls: contact
//! manifolds with penetration depth, the sampled penetration loss, and
//! geometric contact metrics.

mod gjk;
mod loss;
mod metrics;

pub use gjk::detect_contacts;
pub use loss::{penetration_loss, penetration_loss_scoped, LossScope};
pub use metrics::{
    hand_link_shapes,
    intersection_volume, intersection_volume_ellipsoids, max_penetration, max_penetration_meshes,
};

use crate::geom::Ellipsoid;
use crate::Vec3;
use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("collision query between bodies {0} and {1} did not converge")]
    NoConvergence(usize, usize),
    #[error("hull shape is degenerate (needs rank 3)")]
    DegenerateHull,
    #[error("voxel pitch {0} must be positive and finite")]
    BadVoxel(f64),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}

/// One contact: position, unit normal pointing from body A into body B, and
/// depth along the normal. Depth is positive when penetrating; proximal
/// contacts inside the query margin carry a small negative depth (the
/// separation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub depth: f64,
    pub body_a: usize,
    pub body_b: usize,
}

/// Up to four contact points for one body pair, deepest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactManifold {
    pub body_a: usize,
    pub body_b: usize,
    pub points: Vec<ContactPoint>,
}

impl ContactManifold {
    pub fn max_depth(&self) -> f64 {
        self.points.iter().map(|p| p.depth).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A convex collision shape in its own local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvexShape {
    Ellipsoid(Ellipsoid),
    Hull(HullShape),
}

/// Convex hull of a vertex cloud (only the vertices are kept; support
/// queries scan them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullShape {
    points: Vec<Vec3>,
}

impl HullShape {
    /// Validates a rank-3 vertex set.
    pub fn new(points: Vec<Vec3>) -> Result<Self, ContactError> {
        if points.len() < 4 {
            return Err(ContactError::DegenerateHull);
        }
        let mean: Vec3 = points.iter().sum::<Vec3>() / points.len() as f64;
        let mut cov = crate::Mat3::zeros();
        for p in &points {
            let d = p - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |a, &b| a.max(b));
        if eig.iter().any(|&v| v < 1e-12 * max) || max == 0.0 {
            return Err(ContactError::DegenerateHull);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }
}

impl ConvexShape {
    pub fn support_local(&self, dir: Vec3) -> Vec3 {
        match self {
            ConvexShape::Ellipsoid(e) => e.support_point_unchecked(dir.normalize()),
            ConvexShape::Hull(h) => {
                let mut best = h.points[0];
                let mut best_d = best.dot(&dir);
                for p in &h.points[1..] {
                    let d = p.dot(&dir);
                    if d > best_d {
                        best_d = d;
                        best = *p;
                    }
                }
                best
            }
        }
    }

    pub fn support_world(&self, pose: &Isometry3<f64>, dir: Vec3) -> Vec3 {
        let local = pose.rotation.inverse() * dir;
        (pose * nalgebra::Point3::from(self.support_local(local))).coords
    }

    /// All local vertices within `tol` of the supporting plane in `dir`
    /// (world). For an ellipsoid this is always the single support point.
    pub fn support_set_world(&self, pose: &Isometry3<f64>, dir: Vec3, tol: f64) -> Vec<Vec3> {
        match self {
            ConvexShape::Ellipsoid(_) => vec![self.support_world(pose, dir)],
            ConvexShape::Hull(h) => {
                let local = pose.rotation.inverse() * dir;
                let max = h.points.iter().map(|p| p.dot(&local)).fold(f64::NEG_INFINITY, f64::max);
                h.points
                    .iter()
                    .filter(|p| p.dot(&local) >= max - tol)
                    .map(|p| (pose * nalgebra::Point3::from(*p)).coords)
                    .collect()
            }
        }
    }

    pub fn aabb_world(&self, pose: &Isometry3<f64>) -> (Vec3, Vec3) {
        match self {
            ConvexShape::Ellipsoid(e) => {
                let composed = Ellipsoid::new(
                    (pose * nalgebra::Point3::from(e.center())).coords,
                    e.radii(),
                    (pose.rotation.to_rotation_matrix() * e.rotation()).scaled_axis(),
                )
                .expect("valid ellipsoid stays valid under isometry");
                composed.aabb()
            }
            ConvexShape::Hull(h) => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in &h.points {
                    let w = (pose * nalgebra::Point3::from(*p)).coords;
                    lo = lo.inf(&w);
                    hi = hi.sup(&w);
                }
                (lo, hi)
            }
        }
    }

    /// A characteristic size used for tolerance scaling.
    pub fn extent(&self) -> f64 {
        match self {
            ConvexShape::Ellipsoid(e) => e.radii().max(),
            ConvexShape::Hull(h) => {
                let (lo, hi) = {
                    let mut lo = Vec3::repeat(f64::INFINITY);
                    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                    for p in &h.points {
                        lo = lo.inf(p);
                        hi = hi.sup(p);
                    }
                    (lo, hi)
                };
                (hi - lo).max() / 2.0
            }
        }
    }
}

pub(crate) fn aabb_overlap(a: (Vec3, Vec3), b: (Vec3, Vec3), margin: f64) -> bool {
    (0..3).all(|k| a.0[k] - margin <= b.1[k] && b.0[k] - margin <= a.1[k])
}
