//! Grasp-stability simulation and optimization over ellipsoid hand-object states.
//!
//! A hand is modeled as 16 articulated ellipsoid links plus one rigid object.
//! The crate provides the geometric primitives (implicit ellipsoids, meshes,
//! convex hulls), the articulated hand template with forward kinematics,
//! convex contact queries, an impulse-based rigid-body simulator with a
//! PD-driven hand, a stability cost over simulation rollouts, and an
//! iterative Gaussian sampling optimizer that refines a hand-object state
//! until the grasp is physically stable.

pub mod contact;
pub mod fixtures;
pub mod geom;
pub mod hand;
pub mod optimizer;
pub mod scene_io;
pub mod sim;
pub mod stability;

/// 3-vector of f64, the working coordinate type (SI meters).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix of f64.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Unit quaternion orientation.
pub type Quat = nalgebra::UnitQuaternion<f64>;
/// Rotation matrix form.
pub type Rot3 = nalgebra::Rotation3<f64>;

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
pub(crate) fn rand_vec3(rng: &mut impl rand::Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

#[cfg(test)]
pub(crate) fn rand_unit(rng: &mut impl rand::Rng) -> Vec3 {
    loop {
        let v = rand_vec3(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[cfg(test)]
pub(crate) fn rand_ellipsoid(rng: &mut impl rand::Rng) -> geom::Ellipsoid {
    let radii = Vec3::new(
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
    );
    geom::Ellipsoid::new(rand_vec3(rng, 1.0), radii, rand_vec3(rng, 2.0)).unwrap()
}
