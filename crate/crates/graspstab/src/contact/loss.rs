//! Sampled penetration loss over the hand-object ellipsoid set:
//! `L = -sum_{x in samples(E_i)} sum_{j != i} E_j(x)` restricted to
//! `E_j(x) < 0`, with the fixed 872-point surface pattern per ellipsoid.

use crate::geom::{unit_sphere_pattern, Ellipsoid, SAMPLE_PATTERN_SIZE};
use crate::hand::HandState;
use crate::Vec3;
use std::sync::OnceLock;

/// Which primitives the outer sample sum runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossScope {
    /// All 17 primitives: hand links and the object ellipsoid.
    #[default]
    AllPrimitives,
    /// Hand links only (pure self-collision).
    HandOnly,
}

fn pattern() -> &'static [Vec3] {
    static PATTERN: OnceLock<Vec<Vec3>> = OnceLock::new();
    PATTERN.get_or_init(|| unit_sphere_pattern(SAMPLE_PATTERN_SIZE))
}

/// Loss over all 17 primitives with the fixed pattern.
pub fn penetration_loss(state: &HandState) -> f64 {
    penetration_loss_scoped(state, LossScope::AllPrimitives)
}

pub fn penetration_loss_scoped(state: &HandState, scope: LossScope) -> f64 {
    let prims: Vec<Ellipsoid> = match scope {
        LossScope::AllPrimitives => state.all_ellipsoids(),
        LossScope::HandOnly => state.links.clone(),
    };
    ellipsoid_set_loss(&prims)
}

/// The same loss over an arbitrary ellipsoid set.
pub fn ellipsoid_set_loss(prims: &[Ellipsoid]) -> f64 {
    let pat = pattern();
    let aabbs: Vec<(Vec3, Vec3)> = prims.iter().map(|e| e.aabb()).collect();
    let mut loss = 0.0;
    for (i, ei) in prims.iter().enumerate() {
        let rot = ei.rotation();
        let r = ei.radii();
        let c = ei.center();
        // only ellipsoids whose bounds overlap E_i can swallow its samples
        let others: Vec<usize> = (0..prims.len())
            .filter(|&j| j != i && super::aabb_overlap(aabbs[i], aabbs[j], 0.0))
            .collect();
        if others.is_empty() {
            continue;
        }
        for u in pat {
            let x = c + rot * Vec3::new(r.x * u.x, r.y * u.y, r.z * u.z);
            for &j in &others {
                let v = prims[j].implicit_value_unchecked(x);
                if v < 0.0 {
                    loss -= v;
                }
            }
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn disjoint_spheres_zero() {
        let a = Ellipsoid::sphere(Vec3::zeros(), 0.5).unwrap();
        let b = Ellipsoid::sphere(Vec3::new(2.0, 0.0, 0.0), 0.5).unwrap();
        assert_eq!(ellipsoid_set_loss(&[a, b]), 0.0);
    }

    #[test]
    fn nested_spheres_closed_form() {
        // every sample of the inner sphere evaluates to -0.75 in the outer,
        // outer samples are outside the inner: 872 * 0.75 = 654 exactly
        let outer = Ellipsoid::sphere(Vec3::zeros(), 1.0).unwrap();
        let inner = Ellipsoid::sphere(Vec3::zeros(), 0.5).unwrap();
        let loss = ellipsoid_set_loss(&[outer, inner]);
        assert_abs_diff_eq!(loss, 654.0, epsilon = 1e-9);
    }

    #[test]
    fn dense_oracle_agrees_on_random_overlaps() {
        // independent oracle: uniform random surface points (Marsaglia via
        // normal deviates), scaled to the 872-sample sum
        use rand::Rng;
        let mut rng = crate::test_rng(77);
        let n_dense = 100_000usize;
        for case in 0..20 {
            let a = crate::rand_ellipsoid(&mut rng);
            // force solid overlap: center b inside a
            let dir = crate::rand_unit(&mut rng);
            let b = Ellipsoid::new(
                a.center() + dir * (a.radii().min() * rng.random_range(0.2..0.8)),
                Vec3::new(
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.3..1.2),
                ),
                crate::rand_vec3(&mut rng, 2.0),
            )
            .unwrap();
            let pair = [a, b];
            let loss = ellipsoid_set_loss(&pair);
            assert!(loss > 0.0, "case {case} does not overlap");

            let mut dense = 0.0;
            for (i, j) in [(0usize, 1usize), (1, 0)] {
                let e = &pair[i];
                let rot = e.rotation();
                let r = e.radii();
                for _ in 0..n_dense {
                    let g = Vec3::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    )
                    .normalize();
                    let x = e.center() + rot * Vec3::new(r.x * g.x, r.y * g.y, r.z * g.z);
                    let v = pair[j].implicit_value_unchecked(x);
                    if v < 0.0 {
                        dense -= v;
                    }
                }
            }
            let oracle = dense * (SAMPLE_PATTERN_SIZE as f64 / n_dense as f64);
            let rel = (loss - oracle).abs() / oracle.max(1e-12);
            assert!(rel < 0.03, "case {case}: loss {loss} vs oracle {oracle} (rel {rel})");
        }
    }

    #[test]
    fn loss_is_continuous_under_small_perturbation() {
        let a = Ellipsoid::sphere(Vec3::zeros(), 0.5).unwrap();
        let base = Ellipsoid::sphere(Vec3::new(0.6, 0.0, 0.0), 0.5).unwrap();
        let mut prev = ellipsoid_set_loss(&[a, base]);
        assert!(prev > 0.0);
        let mut max_jump: f64 = 0.0;
        for k in 1..=100 {
            let b = Ellipsoid::sphere(Vec3::new(0.6 + 0.001 * k as f64, 0.0, 0.0), 0.5).unwrap();
            let cur = ellipsoid_set_loss(&[a, b]);
            max_jump = max_jump.max((cur - prev).abs());
            prev = cur;
        }
        // Lipschitz-ish bound estimated from the fixture scale
        assert!(max_jump < 2.0, "loss jump {max_jump} over 1 mm steps");
    }
}
