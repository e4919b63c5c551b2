//! Conversions between implicit ellipsoid sets and explicit triangle meshes.
//!
//! Implicit to explicit: the surface is the zero isosurface of the min-union
//! `M(x) = min_i E_i(x)`; each ellipsoid is surface-sampled, samples strictly
//! inside any other ellipsoid are dropped, and the survivors are hulled.
//! Explicit to implicit: each labeled vertex segment is fitted with an
//! oriented bounding box and the box becomes the ellipsoid.

use super::{convex_hull, fit_obb, Ellipsoid, GeomError, TriMesh};
use crate::Vec3;

/// Retention tolerance for the min-union rule: a sample survives when no
/// other ellipsoid evaluates below this at the sample (points exactly on two
/// surfaces are retained).
pub const EQ3_RETENTION_TOL: f64 = -1e-9;

/// Samples every ellipsoid surface, applies the min-union retention rule,
/// and hulls the retained points into a watertight mesh. If everything is
/// swallowed, falls back to the hull of the outermost ellipsoid's samples.
pub fn ellipsoids_to_mesh(es: &[Ellipsoid], samples_per: usize) -> Result<TriMesh, GeomError> {
    if es.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let clouds: Vec<Vec<Vec3>> = es.iter().map(|e| e.sample_surface(samples_per)).collect();
    let mut retained: Vec<Vec3> = Vec::new();
    for (i, cloud) in clouds.iter().enumerate() {
        for &x in cloud {
            let inside_other = es
                .iter()
                .enumerate()
                .any(|(j, e)| j != i && e.implicit_value_unchecked(x) < EQ3_RETENTION_TOL);
            if !inside_other {
                retained.push(x);
            }
        }
    }
    match convex_hull(&retained) {
        Ok(mesh) => Ok(mesh),
        Err(_) => {
            let centroid: Vec3 = es.iter().map(|e| e.center()).sum::<Vec3>() / es.len() as f64;
            let outermost = clouds
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    let ra = a.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
                    let rb = b.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
                    ra.partial_cmp(&rb).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            convex_hull(&clouds[outermost])
        }
    }
}

/// Fits one ellipsoid per vertex segment. Labels are part indices in 1..=16;
/// ellipsoids are returned in ascending label order with the center, radii,
/// and orientation of each segment's oriented bounding box.
pub fn mesh_to_ellipsoids(
    mesh: &TriMesh,
    segment_labels: &[usize],
) -> Result<Vec<Ellipsoid>, GeomError> {
    if segment_labels.len() != mesh.vertices.len() {
        return Err(GeomError::InvalidMesh(format!(
            "{} labels for {} vertices",
            segment_labels.len(),
            mesh.vertices.len()
        )));
    }
    let mut labels: Vec<usize> = segment_labels.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let mut out = Vec::with_capacity(labels.len());
    for label in labels {
        if !(1..=16).contains(&label) {
            return Err(GeomError::LabelOutOfRange(label));
        }
        let segment: Vec<Vec3> = mesh
            .vertices
            .iter()
            .zip(segment_labels)
            .filter(|(_, &l)| l == label)
            .map(|(v, _)| *v)
            .collect();
        let obb = fit_obb(&segment).map_err(|e| GeomError::DegenerateSegment {
            label,
            reason: e.to_string(),
        })?;
        out.push(Ellipsoid {
            center: obb.center,
            radii: obb.half_extents,
            axis_angle: obb.axis_angle,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_sphere_hull_volume() {
        let e = Ellipsoid::sphere(Vec3::zeros(), 1.0).unwrap();
        let mesh = ellipsoids_to_mesh(&[e], 872).unwrap();
        assert!(mesh.is_watertight());
        let v = mesh.signed_volume(Vec3::zeros());
        let exact = 4.0 * PI / 3.0;
        assert!((v - exact).abs() / exact < 0.02);
    }

    #[test]
    fn disjoint_spheres_hull_encloses_both() {
        let a = Ellipsoid::sphere(Vec3::new(-2.0, 0.0, 0.0), 0.5).unwrap();
        let b = Ellipsoid::sphere(Vec3::new(2.0, 0.0, 0.0), 0.5).unwrap();
        let mesh = ellipsoids_to_mesh(&[a, b], 256).unwrap();
        assert!(mesh.is_watertight());
        // every input sample on or inside the hull
        for e in [&a, &b] {
            for p in e.sample_surface(256) {
                for t in &mesh.triangles {
                    let n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                        .cross(&(mesh.vertices[t[2]] - mesh.vertices[t[0]]))
                        .normalize();
                    assert!(n.dot(&(p - mesh.vertices[t[0]])) <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn overlapping_retention_matches_brute_force() {
        // three finger-sized overlapping ellipsoids
        let es = [
            Ellipsoid::new(Vec3::zeros(), Vec3::new(0.02, 0.01, 0.01), Vec3::zeros()).unwrap(),
            Ellipsoid::new(
                Vec3::new(0.018, 0.0, 0.0),
                Vec3::new(0.015, 0.009, 0.009),
                Vec3::new(0.0, 0.0, 0.3),
            )
            .unwrap(),
            Ellipsoid::new(
                Vec3::new(0.03, 0.004, 0.0),
                Vec3::new(0.012, 0.008, 0.008),
                Vec3::new(0.0, 0.2, 0.5),
            )
            .unwrap(),
        ];
        let n = 872;
        let mut retained_expected = 0usize;
        for (i, e) in es.iter().enumerate() {
            for x in e.sample_surface(n) {
                let inside = es
                    .iter()
                    .enumerate()
                    .any(|(j, o)| j != i && o.implicit_value(x).unwrap() < EQ3_RETENTION_TOL);
                if !inside {
                    retained_expected += 1;
                }
            }
        }
        assert!(retained_expected < 3 * n, "fixture must actually overlap");
        let mesh = ellipsoids_to_mesh(&es, n).unwrap();
        assert!(mesh.is_watertight());
        // hull vertex count cannot exceed the retained count
        assert!(mesh.vertices.len() <= retained_expected);
    }

    #[test]
    fn swallowed_ellipsoid_falls_back_to_outer() {
        let outer = Ellipsoid::sphere(Vec3::zeros(), 1.0).unwrap();
        let inner = Ellipsoid::sphere(Vec3::zeros(), 0.3).unwrap();
        let mesh = ellipsoids_to_mesh(&[outer, inner], 256).unwrap();
        let v = mesh.signed_volume(Vec3::zeros());
        let exact = 4.0 * PI / 3.0;
        assert!((v - exact).abs() / exact < 0.03);
    }

    #[test]
    fn box_cloud_to_ellipsoid() {
        let mesh = super::super::mesh::box_mesh(Vec3::zeros(), Vec3::new(0.4, 0.2, 0.1));
        let labels = vec![1usize; mesh.vertices.len()];
        let es = mesh_to_ellipsoids(&mesh, &labels).unwrap();
        assert_eq!(es.len(), 1);
        let c = es[0].canonicalize();
        assert_abs_diff_eq!(c.radii[0], 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(c.radii[1], 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(c.radii[2], 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(Vec3::from(c.axis_angle).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rotated_cloud_recovers_rotation() {
        let rot = crate::Rot3::from_scaled_axis(Vec3::new(0.3, 0.7, -0.2));
        let base = super::super::mesh::box_mesh(Vec3::zeros(), Vec3::new(0.4, 0.2, 0.1));
        let mesh = base.transformed(&rot, Vec3::new(0.5, 0.5, 0.5));
        let labels = vec![2usize; mesh.vertices.len()];
        let es = mesh_to_ellipsoids(&mesh, &labels).unwrap();
        let c = es[0].canonicalize();
        for (k, &r) in [0.4, 0.2, 0.1].iter().enumerate() {
            let axis_true = rot * Vec3::ith(k, 1.0);
            let axis_fit = c.rotation() * Vec3::ith(k, 1.0);
            let ang = axis_fit.dot(&axis_true).abs().min(1.0).acos();
            assert!(ang < 1.0f64.to_radians(), "axis {k} (r={r}) off by {ang}");
        }
    }

    #[test]
    fn ellipsoid_roundtrip_radii_and_orientation() {
        let e = Ellipsoid::new(
            Vec3::new(0.05, -0.02, 0.01),
            Vec3::new(0.06, 0.03, 0.015),
            Vec3::new(0.5, -0.3, 0.8),
        )
        .unwrap();
        let mesh = ellipsoids_to_mesh(&[e], 872).unwrap();
        let labels = vec![1usize; mesh.vertices.len()];
        let back = mesh_to_ellipsoids(&mesh, &labels).unwrap()[0].canonicalize();
        let orig = e.canonicalize();
        for k in 0..3 {
            let rel = (back.radii[k] - orig.radii[k]).abs() / orig.radii[k];
            assert!(rel < 0.05, "radius {k} off by {rel}");
        }
        for k in 0..3 {
            let a = orig.rotation() * Vec3::ith(k, 1.0);
            let b = back.rotation() * Vec3::ith(k, 1.0);
            let ang = a.dot(&b).abs().min(1.0).acos();
            assert!(ang < 5.0f64.to_radians(), "axis {k} off by {ang} rad");
        }
    }

    #[test]
    fn bad_labels_rejected() {
        let mesh = super::super::mesh::box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        let labels = vec![17usize; mesh.vertices.len()];
        assert!(matches!(
            mesh_to_ellipsoids(&mesh, &labels),
            Err(GeomError::LabelOutOfRange(17))
        ));
        let flat: Vec<Vec3> = (0..9)
            .map(|i| Vec3::new((i % 3) as f64, (i / 3) as f64, 0.0))
            .collect();
        let tris = vec![[0, 1, 4], [0, 4, 3]];
        let flat_mesh = TriMesh::new(flat, tris).unwrap();
        let labels = vec![3usize; flat_mesh.vertices.len()];
        assert!(matches!(
            mesh_to_ellipsoids(&flat_mesh, &labels),
            Err(GeomError::DegenerateSegment { label: 3, .. })
        ));
    }
}
