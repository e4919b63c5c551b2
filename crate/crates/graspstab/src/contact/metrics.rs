//! Geometric contact-quality metrics: maximum hand-object penetration depth
//! and voxelized intersection volume.

use super::{detect_contacts, ContactError, ConvexShape, HullShape};
use crate::geom::{convex_hull, Ellipsoid, TriMesh};
use crate::Vec3;
use nalgebra::Isometry3;

/// Maximum contact depth over hand-shape/object pairs, 0 when nothing
/// touches.
pub fn max_penetration(
    hand_shapes: &[(ConvexShape, Isometry3<f64>)],
    object: &ConvexShape,
    object_pose: &Isometry3<f64>,
) -> Result<f64, ContactError> {
    let mut max_depth = 0.0f64;
    for (i, (shape, pose)) in hand_shapes.iter().enumerate() {
        if let Some(m) = detect_contacts(i, shape, pose, usize::MAX, object, object_pose, 0.0)? {
            max_depth = max_depth.max(m.max_depth());
        }
    }
    Ok(max_depth)
}

/// Mesh-level variant: both meshes are taken by their convex hulls.
pub fn max_penetration_meshes(hand: &TriMesh, object: &TriMesh) -> Result<f64, ContactError> {
    let ha = convex_hull(&hand.vertices)?;
    let hb = convex_hull(&object.vertices)?;
    let sa = ConvexShape::Hull(HullShape::new(ha.vertices)?);
    let sb = ConvexShape::Hull(HullShape::new(hb.vertices)?);
    max_penetration(&[(sa, Isometry3::identity())], &sb, &Isometry3::identity())
}

/// Shapes for the 16 links of a posed hand state.
pub fn hand_link_shapes(state: &crate::hand::HandState) -> Vec<(ConvexShape, Isometry3<f64>)> {
    state
        .links
        .iter()
        .map(|e| (ConvexShape::Ellipsoid(*e), Isometry3::identity()))
        .collect()
}

struct VoxelGrid {
    origin: Vec3,
    dims: [usize; 3],
    voxel: f64,
}

impl VoxelGrid {
    fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                (i as f64 + 0.5) * self.voxel,
                (j as f64 + 0.5) * self.voxel,
                (k as f64 + 0.5) * self.voxel,
            )
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }
}

/// Intersection volume in cubic centimeters by voxelizing the joint
/// bounding box; voxel centers are classified by ray parity with a
/// three-axis majority vote. Both meshes must be watertight.
pub fn intersection_volume(
    hand_mesh: &TriMesh,
    object_mesh: &TriMesh,
    voxel: f64,
) -> Result<f64, ContactError> {
    let grid = match joint_grid(hand_mesh.aabb(), object_mesh.aabb(), voxel)? {
        Some(g) => g,
        None => return Ok(0.0),
    };
    check_watertight(hand_mesh)?;
    check_watertight(object_mesh)?;
    let in_hand = inside_mask(hand_mesh, &grid);
    let in_obj = inside_mask(object_mesh, &grid);
    let count = in_hand.iter().zip(&in_obj).filter(|(a, b)| **a && **b).count();
    Ok(count as f64 * voxel.powi(3) * 1e6)
}

/// Intersection volume between a set of hand-link ellipsoids and an object
/// mesh: voxel centers inside the mesh (ray parity) and inside any link
/// (exact implicit test).
pub fn intersection_volume_ellipsoids(
    links: &[Ellipsoid],
    object_mesh: &TriMesh,
    voxel: f64,
) -> Result<f64, ContactError> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for e in links {
        let (l, h) = e.aabb();
        lo = lo.inf(&l);
        hi = hi.sup(&h);
    }
    let grid = match joint_grid((lo, hi), object_mesh.aabb(), voxel)? {
        Some(g) => g,
        None => return Ok(0.0),
    };
    check_watertight(object_mesh)?;
    let in_obj = inside_mask(object_mesh, &grid);
    let mut count = 0usize;
    for k in 0..grid.dims[2] {
        for j in 0..grid.dims[1] {
            for i in 0..grid.dims[0] {
                if !in_obj[grid.index(i, j, k)] {
                    continue;
                }
                let c = grid.center(i, j, k);
                if links.iter().any(|e| e.implicit_value_unchecked(c) <= 0.0) {
                    count += 1;
                }
            }
        }
    }
    Ok(count as f64 * voxel.powi(3) * 1e6)
}

fn check_watertight(mesh: &TriMesh) -> Result<(), ContactError> {
    if !mesh.is_watertight() {
        return Err(ContactError::Geom(crate::geom::GeomError::NotWatertight(
            "intersection volume needs closed meshes".into(),
        )));
    }
    Ok(())
}

fn joint_grid(
    a: (Vec3, Vec3),
    b: (Vec3, Vec3),
    voxel: f64,
) -> Result<Option<VoxelGrid>, ContactError> {
    if !(voxel.is_finite() && voxel > 0.0) {
        return Err(ContactError::BadVoxel(voxel));
    }
    let lo = a.0.sup(&b.0);
    let hi = a.1.inf(&b.1);
    if (0..3).any(|k| lo[k] >= hi[k]) {
        return Ok(None);
    }
    let dims = [
        ((hi.x - lo.x) / voxel).ceil() as usize,
        ((hi.y - lo.y) / voxel).ceil() as usize,
        ((hi.z - lo.z) / voxel).ceil() as usize,
    ];
    let total = dims[0] * dims[1] * dims[2];
    if total > 200_000_000 {
        return Err(ContactError::BadVoxel(voxel));
    }
    Ok(Some(VoxelGrid { origin: lo, dims, voxel }))
}

/// Per-voxel inside classification: for each axis, sorted ray crossings per
/// column give a parity; a voxel is inside when at least two axes agree.
fn inside_mask(mesh: &TriMesh, grid: &VoxelGrid) -> Vec<bool> {
    let mut votes = vec![0u8; grid.len()];
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let nu = grid.dims[u];
        let nv = grid.dims[v];
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); nu * nv];
        for t in &mesh.triangles {
            let p = [
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
            ];
            let ulo = p.iter().map(|q| q[u]).fold(f64::INFINITY, f64::min);
            let uhi = p.iter().map(|q| q[u]).fold(f64::NEG_INFINITY, f64::max);
            let vlo = p.iter().map(|q| q[v]).fold(f64::INFINITY, f64::min);
            let vhi = p.iter().map(|q| q[v]).fold(f64::NEG_INFINITY, f64::max);
            let iu0 = (((ulo - grid.origin[u]) / grid.voxel - 0.5).ceil().max(0.0)) as usize;
            let iv0 = (((vlo - grid.origin[v]) / grid.voxel - 0.5).ceil().max(0.0)) as usize;
            for iu in iu0..nu {
                let cu = grid.origin[u] + (iu as f64 + 0.5) * grid.voxel;
                if cu > uhi {
                    break;
                }
                for iv in iv0..nv {
                    let cv = grid.origin[v] + (iv as f64 + 0.5) * grid.voxel;
                    if cv > vhi {
                        break;
                    }
                    if let Some(w) = ray_triangle_axis(&p, axis, cu, cv) {
                        columns[iv * nu + iu].push(w);
                    }
                }
            }
        }
        for col in columns.iter_mut() {
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        for k2 in 0..nv {
            for k1 in 0..nu {
                let col = &columns[k2 * nu + k1];
                if col.is_empty() {
                    continue;
                }
                for ia in 0..grid.dims[axis] {
                    let wc = grid.origin[axis] + (ia as f64 + 0.5) * grid.voxel;
                    let below = col.partition_point(|&w| w < wc);
                    if below % 2 == 1 {
                        let mut idx = [0usize; 3];
                        idx[axis] = ia;
                        idx[u] = k1;
                        idx[v] = k2;
                        votes[grid.index(idx[0], idx[1], idx[2])] += 1;
                    }
                }
            }
        }
    }
    votes.into_iter().map(|c| c >= 2).collect()
}

/// Crossing coordinate of an axis-aligned ray through (cu, cv) with the
/// triangle, if any.
fn ray_triangle_axis(p: &[Vec3; 3], axis: usize, cu: f64, cv: f64) -> Option<f64> {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let (x0, y0) = (p[0][u], p[0][v]);
    let (x1, y1) = (p[1][u], p[1][v]);
    let (x2, y2) = (p[2][u], p[2][v]);
    let d = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
    if d.abs() < 1e-30 {
        return None;
    }
    let l0 = ((y1 - y2) * (cu - x2) + (x2 - x1) * (cv - y2)) / d;
    let l1 = ((y2 - y0) * (cu - x2) + (x0 - x2) * (cv - y2)) / d;
    let l2 = 1.0 - l0 - l1;
    if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
        return None;
    }
    Some(l0 * p[0][axis] + l1 * p[1][axis] + l2 * p[2][axis])
}
