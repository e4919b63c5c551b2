//! 3D convex hull by incremental furthest-point insertion (quickhull).
//! Output is a watertight, outward-wound triangle mesh.

use super::{GeomError, TriMesh};
use crate::Vec3;
use std::collections::HashMap;

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    n: Vec3,
    d: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(v: [usize; 3], pts: &[Vec3]) -> Face {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
        let norm = n.norm();
        let n = if norm > 0.0 { n / norm } else { Vec3::zeros() };
        Face { v, n, d: n.dot(&pts[v[0]]), outside: Vec::new(), alive: true }
    }

    #[inline]
    fn dist(&self, p: &Vec3) -> f64 {
        self.n.dot(p) - self.d
    }
}

/// Convex hull of a point cloud. Exact duplicates are merged; fewer than
/// four non-coplanar points is an error.
pub fn convex_hull(points: &[Vec3]) -> Result<TriMesh, GeomError> {
    let mut pts: Vec<Vec3> = Vec::with_capacity(points.len());
    let mut seen: HashMap<[u64; 3], ()> = HashMap::new();
    for p in points {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite("hull input point"));
        }
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        if seen.insert(key, ()).is_none() {
            pts.push(*p);
        }
    }
    if pts.len() < 4 {
        return Err(GeomError::Degenerate(format!(
            "{} distinct points, need at least 4",
            pts.len()
        )));
    }
    let scale = pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
    let eps = 1e-12 + 1e-9 * scale;

    let (a, b) = extreme_pair(&pts);
    if (pts[a] - pts[b]).norm() <= eps {
        return Err(GeomError::Degenerate("all points coincident".into()));
    }
    let c = furthest_from_line(&pts, a, b);
    let line = (pts[b] - pts[a]).normalize();
    let perp = (pts[c] - pts[a]) - line * (pts[c] - pts[a]).dot(&line);
    if perp.norm() <= eps {
        return Err(GeomError::Degenerate("points are collinear".into()));
    }
    let n0 = (pts[b] - pts[a]).cross(&(pts[c] - pts[a])).normalize();
    let d = pts
        .iter()
        .enumerate()
        .max_by(|(i, p), (j, q)| {
            let dp = (n0.dot(&(*p - pts[a]))).abs();
            let dq = (n0.dot(&(*q - pts[a]))).abs();
            dp.partial_cmp(&dq).unwrap().then(j.cmp(i))
        })
        .map(|(i, _)| i)
        .unwrap();
    if (n0.dot(&(pts[d] - pts[a]))).abs() <= eps {
        return Err(GeomError::Degenerate("points are coplanar".into()));
    }

    // initial tetrahedron, outward wound
    let (t0, t1) = if n0.dot(&(pts[d] - pts[a])) < 0.0 {
        ([a, b, c], [a, c, b])
    } else {
        ([a, c, b], [a, b, c])
    };
    let mut faces = vec![
        Face::new(t0, &pts),
        Face::new([t1[0], t1[1], d], &pts),
        Face::new([t1[1], t1[2], d], &pts),
        Face::new([t1[2], t1[0], d], &pts),
    ];
    let interior = (pts[a] + pts[b] + pts[c] + pts[d]) / 4.0;
    debug_assert!(faces.iter().all(|f| f.dist(&interior) < 0.0));

    for i in 0..pts.len() {
        if [a, b, c, d].contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.dist(&pts[i]) > eps) {
            f.outside.push(i);
        }
    }

    let mut work: Vec<usize> = (0..faces.len()).filter(|&f| !faces[f].outside.is_empty()).collect();
    while let Some(fi) = work.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&i, &&j| {
                faces[fi]
                    .dist(&pts[i])
                    .partial_cmp(&faces[fi].dist(&pts[j]))
                    .unwrap()
                    .then(j.cmp(&i))
            })
            .unwrap();
        let p = pts[apex];

        let mut visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.dist(&p) > eps)
            .map(|(i, _)| i)
            .collect();
        restrict_to_component(&mut visible, fi, &faces);

        // horizon: directed edges of visible faces whose reverse lies outside
        let mut dir_edges: HashMap<(usize, usize), ()> = HashMap::new();
        for &vf in &visible {
            let v = faces[vf].v;
            for k in 0..3 {
                dir_edges.insert((v[k], v[(k + 1) % 3]), ());
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &vf in &visible {
            let v = faces[vf].v;
            for k in 0..3 {
                let e = (v[k], v[(k + 1) % 3]);
                if !dir_edges.contains_key(&(e.1, e.0)) {
                    horizon.push(e);
                }
            }
        }
        if horizon.is_empty() {
            return Err(GeomError::Degenerate("hull horizon collapsed".into()));
        }

        let mut orphans: Vec<usize> = Vec::new();
        for &vf in &visible {
            faces[vf].alive = false;
            orphans.append(&mut faces[vf].outside);
        }
        let mut new_faces: Vec<usize> = Vec::with_capacity(horizon.len());
        for (ea, eb) in horizon {
            let mut f = Face::new([ea, eb, apex], &pts);
            if f.dist(&interior) > 0.0 {
                // numerically flipped sliver; rewind so the interior stays below
                f = Face::new([eb, ea, apex], &pts);
            }
            new_faces.push(faces.len());
            faces.push(f);
        }
        for o in orphans {
            if o == apex {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for &nf in &new_faces {
                let dist = faces[nf].dist(&pts[o]);
                if dist > eps && best.map_or(true, |(_, bd)| dist > bd) {
                    best = Some((nf, dist));
                }
            }
            if let Some((nf, _)) = best {
                faces[nf].outside.push(o);
            }
        }
        for &nf in &new_faces {
            if !faces[nf].outside.is_empty() {
                work.push(nf);
            }
        }
    }

    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    alive.sort_by_key(|f| f.v);
    for f in alive {
        let mut tri = [0usize; 3];
        for (slot, &vi) in tri.iter_mut().zip(f.v.iter()) {
            let next = remap.len();
            let id = *remap.entry(vi).or_insert(next);
            if id == vertices.len() {
                vertices.push(pts[vi]);
            }
            *slot = id;
        }
        triangles.push(tri);
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    if !mesh.is_watertight() {
        return Err(GeomError::Degenerate("hull output not watertight".into()));
    }
    Ok(mesh)
}

fn extreme_pair(pts: &[Vec3]) -> (usize, usize) {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for (i, p) in pts.iter().enumerate() {
        for k in 0..3 {
            if p[k] < pts[lo[k]][k] {
                lo[k] = i;
            }
            if p[k] > pts[hi[k]][k] {
                hi[k] = i;
            }
        }
    }
    (0..3)
        .map(|k| (lo[k], hi[k]))
        .max_by(|&(a1, b1), &(a2, b2)| {
            let d1 = (pts[a1] - pts[b1]).norm_squared();
            let d2 = (pts[a2] - pts[b2]).norm_squared();
            d1.partial_cmp(&d2).unwrap()
        })
        .unwrap()
}

fn furthest_from_line(pts: &[Vec3], a: usize, b: usize) -> usize {
    let dir = (pts[b] - pts[a]).normalize();
    pts.iter()
        .enumerate()
        .max_by(|(i, p), (j, q)| {
            let dp = ((*p - pts[a]) - dir * (*p - pts[a]).dot(&dir)).norm_squared();
            let dq = ((*q - pts[a]) - dir * (*q - pts[a]).dot(&dir)).norm_squared();
            dp.partial_cmp(&dq).unwrap().then(j.cmp(i))
        })
        .map(|(i, _)| i)
        .unwrap()
}

/// Keeps only the faces edge-connected to `seed`; a thresholded visibility
/// test can otherwise produce disconnected visible sets whose horizon is not
/// a closed loop.
fn restrict_to_component(visible: &mut Vec<usize>, seed: usize, faces: &[Face]) {
    if visible.len() <= 1 {
        return;
    }
    let mut edge_owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &vf in visible.iter() {
        let v = faces[vf].v;
        for k in 0..3 {
            let (p, q) = (v[k], v[(k + 1) % 3]);
            edge_owner.entry((p.min(q), p.max(q))).or_default().push(vf);
        }
    }
    let mut keep: Vec<usize> = vec![seed];
    let mut stack = vec![seed];
    while let Some(f) = stack.pop() {
        let v = faces[f].v;
        for k in 0..3 {
            let (p, q) = (v[k], v[(k + 1) % 3]);
            for &other in &edge_owner[&(p.min(q), p.max(q))] {
                if other != f && !keep.contains(&other) {
                    keep.push(other);
                    stack.push(other);
                }
            }
        }
    }
    if keep.len() != visible.len() {
        visible.retain(|f| keep.contains(f));
    }
}
