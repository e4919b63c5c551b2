//! Triangle meshes, Wavefront OBJ ingestion/export, and rigid-body mass
//! properties by signed tetrahedron decomposition.

use super::GeomError;
use crate::{Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Indexed triangle mesh. Construction drops exactly-degenerate (zero-area)
/// triangles and validates index ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Mass, center of mass, and inertia tensor about the center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyProps {
    pub mass: f64,
    pub com: Vec3,
    pub inertia: Mat3,
}

impl RigidBodyProps {
    /// Checks mass > 0, positive-definite inertia, and the eigenvalue
    /// triangle inequality that any physical body satisfies.
    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(GeomError::InvalidMesh(format!("mass {} not positive", self.mass)));
        }
        let eig = self.inertia.symmetric_eigenvalues();
        let (a, b, c) = (eig[0], eig[1], eig[2]);
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(GeomError::InvalidMesh("inertia not positive-definite".into()));
        }
        let tol = 1e-9 * (a + b + c);
        if a + b + tol < c || a + c + tol < b || b + c + tol < a {
            return Err(GeomError::InvalidMesh(
                "inertia violates triangle inequality".into(),
            ));
        }
        Ok(())
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeomError> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        for t in triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(GeomError::InvalidMesh(format!(
                    "triangle {t:?} references a missing vertex (count {n})"
                )));
            }
            let area2 = (vertices[t[1]] - vertices[t[0]])
                .cross(&(vertices[t[2]] - vertices[t[0]]))
                .norm();
            if area2 > 0.0 {
                kept.push(t);
            }
        }
        Ok(Self { vertices, triangles: kept })
    }

    /// Every directed edge must appear exactly once and be matched by its
    /// reverse: the closed, consistently oriented 2-manifold condition.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a == b {
                    return false;
                }
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += if a < b { 1 } else { 4 };
            }
        }
        // each undirected edge: one forward (1) + one reverse (4)
        edges.values().all(|&v| v == 5)
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Signed volume with tetrahedra rooted at `origin`. Independent of
    /// `origin` exactly when the mesh is closed.
    pub fn signed_volume(&self, origin: Vec3) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0]] - origin;
                let b = self.vertices[t[1]] - origin;
                let c = self.vertices[t[2]] - origin;
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Volume, center of mass, and inertia about the center of mass for a
    /// uniform density solid. Errors if the signed volume is inconsistent
    /// under a change of reference point by more than 1% (open mesh), or if
    /// the signed volume is not positive (inverted winding).
    pub fn mass_props(&self, density: f64) -> Result<RigidBodyProps, GeomError> {
        if self.triangles.is_empty() {
            return Err(GeomError::EmptyInput);
        }
        let v0 = self.signed_volume(Vec3::zeros());
        let (lo, hi) = self.aabb();
        let shifted = lo + (hi - lo) * 1.618 + Vec3::new(0.1, 0.2, 0.3);
        let v1 = self.signed_volume(shifted);
        let scale = v0.abs().max(v1.abs());
        if scale == 0.0 || (v0 - v1).abs() > 0.01 * scale {
            return Err(GeomError::NotWatertight(format!(
                "signed volume {v0:.6e} vs {v1:.6e} under reference shift"
            )));
        }
        if v0 <= 0.0 {
            return Err(GeomError::InvalidMesh(
                "negative signed volume; triangle winding is inverted".into(),
            ));
        }

        let mut volume = 0.0;
        let mut first = Vec3::zeros();
        let mut second = Mat3::zeros();
        let canon = (Mat3::identity() + Mat3::repeat(1.0)) / 120.0;
        for t in &self.triangles {
            let m = Mat3::from_columns(&[
                self.vertices[t[0]],
                self.vertices[t[1]],
                self.vertices[t[2]],
            ]);
            let det = m.determinant();
            volume += det / 6.0;
            first += det / 24.0 * (self.vertices[t[0]] + self.vertices[t[1]] + self.vertices[t[2]]);
            second += det * m * canon * m.transpose();
        }
        let com = first / volume;
        let second_com = second - volume * com * com.transpose();
        let inertia = (Mat3::identity() * second_com.trace() - second_com) * density;
        let props = RigidBodyProps { mass: density * volume, com, inertia };
        props.validate()?;
        Ok(props)
    }

    pub fn transformed(&self, rot: &crate::Rot3, trans: Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| rot * v + trans).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Reads `v` and `f` records; anything else is ignored. Faces with more
    /// than three vertices are fan-triangulated.
    pub fn read_obj<R: std::io::Read>(reader: R) -> Result<TriMesh, GeomError> {
        let mut vertices: Vec<Vec3> = Vec::new();
        let mut triangles: Vec<[usize; 3]> = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let mut coords = [0.0f64; 3];
                    for c in coords.iter_mut() {
                        *c = it
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| GeomError::ObjParse {
                                line: lineno + 1,
                                msg: "vertex needs three coordinates".into(),
                            })?;
                    }
                    vertices.push(Vec3::from(coords));
                }
                Some("f") => {
                    let idx: Result<Vec<usize>, GeomError> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| GeomError::ObjParse {
                                line: lineno + 1,
                                msg: format!("bad face index '{tok}'"),
                            })?;
                            let resolved = if i < 0 {
                                vertices.len() as i64 + i
                            } else {
                                i - 1
                            };
                            if resolved < 0 || resolved as usize >= vertices.len() {
                                return Err(GeomError::ObjParse {
                                    line: lineno + 1,
                                    msg: format!("face index {i} out of range"),
                                });
                            }
                            Ok(resolved as usize)
                        })
                        .collect();
                    let idx = idx?;
                    if idx.len() < 3 {
                        return Err(GeomError::ObjParse {
                            line: lineno + 1,
                            msg: "face needs at least three vertices".into(),
                        });
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, triangles)
    }

    pub fn read_obj_file<P: AsRef<Path>>(path: P) -> Result<TriMesh, GeomError> {
        TriMesh::read_obj(std::fs::File::open(path)?)
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<(), GeomError> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn write_obj_file<P: AsRef<Path>>(&self, path: P) -> Result<(), GeomError> {
        let mut buf = Vec::new();
        self.write_obj(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Axis-aligned box mesh (12 triangles, outward winding).
pub(crate) fn box_mesh(center: Vec3, half: Vec3) -> TriMesh {
    let mut vertices = Vec::with_capacity(8);
    for &z in &[-1.0, 1.0] {
        for &y in &[-1.0, 1.0] {
            for &x in &[-1.0, 1.0] {
                vertices.push(center + Vec3::new(half.x * x, half.y * y, half.z * z));
            }
        }
    }
    let quads = [
        [0, 2, 3, 1], // z-
        [4, 5, 7, 6], // z+
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriMesh::new(vertices, triangles).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_mass_props() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        assert!(cube.is_watertight());
        let p = cube.mass_props(500.0).unwrap();
        assert_abs_diff_eq!(p.mass, 500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.com.norm(), 0.0, epsilon = 1e-12);
        for k in 0..3 {
            assert_abs_diff_eq!(p.inertia[(k, k)], 500.0 / 6.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(p.inertia[(0, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn translation_invariance() {
        let a = box_mesh(Vec3::zeros(), Vec3::new(0.3, 0.2, 0.1));
        let b = box_mesh(Vec3::new(1.5, -2.0, 0.7), Vec3::new(0.3, 0.2, 0.1));
        let pa = a.mass_props(800.0).unwrap();
        let pb = b.mass_props(800.0).unwrap();
        assert_abs_diff_eq!(pa.mass, pb.mass, epsilon = 1e-9);
        assert_abs_diff_eq!((pa.inertia - pb.inertia).norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!((pb.com - Vec3::new(1.5, -2.0, 0.7)).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn scaling_laws() {
        let a = box_mesh(Vec3::zeros(), Vec3::new(0.3, 0.2, 0.1));
        let s = 2.5;
        let b = TriMesh::new(
            a.vertices.iter().map(|v| v * s).collect(),
            a.triangles.clone(),
        )
        .unwrap();
        let pa = a.mass_props(1.0).unwrap();
        let pb = b.mass_props(1.0).unwrap();
        assert_abs_diff_eq!(pb.mass, pa.mass * s.powi(3), epsilon = 1e-9);
        assert_abs_diff_eq!(
            (pb.inertia - pa.inertia * s.powi(5)).norm(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn open_mesh_rejected() {
        let mut cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        cube.triangles.pop();
        assert!(!cube.is_watertight());
        assert!(matches!(
            cube.mass_props(500.0),
            Err(GeomError::NotWatertight(_))
        ));
    }

    #[test]
    fn obj_roundtrip() {
        let cube = box_mesh(Vec3::new(0.5, 0.25, -1.0), Vec3::new(0.5, 0.25, 0.125));
        let mut buf = Vec::new();
        cube.write_obj(&mut buf).unwrap();
        let back = TriMesh::read_obj(&buf[..]).unwrap();
        assert_eq!(cube, back);
    }

    #[test]
    fn obj_ignores_other_records_and_slashes() {
        let src = "\
# comment
vn 0 0 1
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
vt 0.5 0.5
usemtl whatever
f 1/1/1 2/2/2 3/3/3
f 1 3 4
f 1 4 2
f 2/1 4/2 3/3
";
        let m = TriMesh::read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 4);
        assert!(m.is_watertight());
    }

    #[test]
    fn obj_bad_face_index() {
        let src = "v 0 0 0\nv 1 0 0\nf 1 2 9\n";
        assert!(matches!(
            TriMesh::read_obj(src.as_bytes()),
            Err(GeomError::ObjParse { line: 3, .. })
        ));
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let m = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(m.triangles.is_empty());
    }
}
