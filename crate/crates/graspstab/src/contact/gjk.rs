//! Convex contact queries over support functions: GJK for separation
//! distance, directional support minimization for penetration depth, and
//! face-clipping manifold expansion for flat-on-flat contact.

use super::{aabb_overlap, ContactError, ContactManifold, ContactPoint, ConvexShape};
use crate::Vec3;
use nalgebra::Isometry3;

const GJK_MAX_ITERS: usize = 96;

#[derive(Debug, Clone, Copy)]
struct SupportVertex {
    w: Vec3,
    a: Vec3,
    b: Vec3,
}

struct Query<'a> {
    shape_a: &'a ConvexShape,
    pose_a: &'a Isometry3<f64>,
    shape_b: &'a ConvexShape,
    pose_b: &'a Isometry3<f64>,
}

impl Query<'_> {
    fn support(&self, dir: Vec3) -> SupportVertex {
        let a = self.shape_a.support_world(self.pose_a, dir);
        let b = self.shape_b.support_world(self.pose_b, -dir);
        SupportVertex { w: a - b, a, b }
    }
}

/// Convex contact query. Returns `None` when the shapes are separated by
/// more than `margin`; otherwise a manifold whose points carry signed depth
/// (positive penetrating) and the contact normal from A into B. The query
/// is evaluated in a canonical argument order so that swapping A and B
/// yields exactly mirrored results.
pub fn detect_contacts(
    body_a: usize,
    shape_a: &ConvexShape,
    pose_a: &Isometry3<f64>,
    body_b: usize,
    shape_b: &ConvexShape,
    pose_b: &Isometry3<f64>,
    margin: f64,
) -> Result<Option<ContactManifold>, ContactError> {
    if body_a > body_b {
        return Ok(
            detect_contacts(body_b, shape_b, pose_b, body_a, shape_a, pose_a, margin)?.map(
                |m| ContactManifold {
                    body_a,
                    body_b,
                    points: m
                        .points
                        .into_iter()
                        .map(|p| ContactPoint {
                            position: p.position,
                            normal: -p.normal,
                            depth: p.depth,
                            body_a,
                            body_b,
                        })
                        .collect(),
                },
            ),
        );
    }
    if !aabb_overlap(shape_a.aabb_world(pose_a), shape_b.aabb_world(pose_b), margin) {
        return Ok(None);
    }
    let q = Query { shape_a, pose_a, shape_b, pose_b };
    let scale = shape_a.extent().max(shape_b.extent()).max(1e-6);

    match gjk(&q, scale).ok_or(ContactError::NoConvergence(body_a, body_b))? {
        GjkResult::Separated { dist, pa, pb } => {
            if dist > margin {
                return Ok(None);
            }
            let normal = (pb - pa) / dist;
            Ok(Some(ContactManifold {
                body_a,
                body_b,
                points: vec![ContactPoint {
                    position: (pa + pb) / 2.0,
                    normal,
                    depth: -dist,
                    body_a,
                    body_b,
                }],
            }))
        }
        GjkResult::Overlapping => {
            let (normal, depth) = min_overlap_direction(&q);
            if depth <= 0.0 {
                // grazing touch the boolean test saw as overlap
                if -depth > margin {
                    return Ok(None);
                }
            }
            let pa = q.shape_a.support_world(q.pose_a, normal);
            let pb = q.shape_b.support_world(q.pose_b, -normal);
            let points = expand_manifold(&q, normal, depth, pa, pb, margin, scale, body_a, body_b);
            Ok(Some(ContactManifold { body_a, body_b, points }))
        }
    }
}

enum GjkResult {
    Separated { dist: f64, pa: Vec3, pb: Vec3 },
    Overlapping,
}

fn gjk(q: &Query, scale: f64) -> Option<GjkResult> {
    let tol = 1e-12 * scale.max(1.0);
    let mut simplex: Vec<SupportVertex> = vec![q.support(Vec3::new(1.0, 0.0, 0.0))];
    let mut last_dist = f64::INFINITY;

    for _ in 0..GJK_MAX_ITERS {
        let (v, lambdas, contained) = closest_to_origin(&simplex);
        if contained {
            return Some(GjkResult::Overlapping);
        }
        // keep only the supporting feature
        let mut feature: Vec<SupportVertex> = Vec::with_capacity(4);
        let mut feature_lambdas: Vec<f64> = Vec::with_capacity(4);
        for (s, &l) in simplex.iter().zip(&lambdas) {
            if l > 0.0 {
                feature.push(*s);
                feature_lambdas.push(l);
            }
        }
        simplex = feature;
        let dist = v.norm();
        if dist < tol.max(1e-14) {
            // touching; the directional minimizer resolves depth and normal
            return Some(GjkResult::Overlapping);
        }
        let (pa, pb) = witness(&simplex, &feature_lambdas);
        let s = q.support(-v / dist);
        // upper bound |v| meets the support-plane lower bound: converged
        if dist - s.w.dot(&(v / dist)) <= 1e-10 * scale.max(1.0) || dist >= last_dist - tol {
            return Some(GjkResult::Separated { dist, pa, pb });
        }
        last_dist = dist;
        simplex.push(s);
    }
    None
}

fn witness(simplex: &[SupportVertex], lambdas: &[f64]) -> (Vec3, Vec3) {
    let mut pa = Vec3::zeros();
    let mut pb = Vec3::zeros();
    for (s, &l) in simplex.iter().zip(lambdas) {
        pa += s.a * l;
        pb += s.b * l;
    }
    (pa, pb)
}

/// Closest point to the origin on the simplex; reduces the simplex to the
/// supporting feature in place. Returns (closest, barycentrics, contained).
fn closest_to_origin(simplex: &[SupportVertex]) -> (Vec3, Vec<f64>, bool) {
    match simplex.len() {
        1 => (simplex[0].w, vec![1.0], false),
        2 => {
            let (p, l) = closest_segment(simplex[0].w, simplex[1].w);
            (p, l.to_vec(), false)
        }
        3 => {
            let (p, l) = closest_triangle(simplex[0].w, simplex[1].w, simplex[2].w);
            (p, l.to_vec(), false)
        }
        4 => closest_tetra(simplex),
        _ => unreachable!(),
    }
}

fn closest_segment(a: Vec3, b: Vec3) -> (Vec3, [f64; 2]) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom == 0.0 {
        return (a, [1.0, 0.0]);
    }
    let t = (-a.dot(&ab) / denom).clamp(0.0, 1.0);
    (a + ab * t, [1.0 - t, t])
}

fn closest_triangle(a: Vec3, b: Vec3, c: Vec3) -> (Vec3, [f64; 3]) {
    // Ericson-style Voronoi region walk for the origin
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, [1.0 - t, t, 0.0]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, [1.0 - t, 0.0, t]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, [0.0, 1.0 - t, t]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

fn closest_tetra(simplex: &[SupportVertex]) -> (Vec3, Vec<f64>, bool) {
    let (a, b, c, d) = (simplex[0].w, simplex[1].w, simplex[2].w, simplex[3].w);
    let faces: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    let pts = [a, b, c, d];
    let mut best: Option<(f64, Vec3, [usize; 3], [f64; 3])> = None;
    let mut outside_any = false;
    for f in faces {
        let other = (0..4).find(|i| !f.contains(i)).unwrap();
        let n = (pts[f[1]] - pts[f[0]]).cross(&(pts[f[2]] - pts[f[0]]));
        let side_other = n.dot(&(pts[other] - pts[f[0]]));
        let side_origin = n.dot(&-pts[f[0]]);
        // origin on the opposite side of this face from the fourth vertex
        if side_other * side_origin < 0.0 || (side_other == 0.0 && side_origin != 0.0) {
            outside_any = true;
            let (p, l) = closest_triangle(pts[f[0]], pts[f[1]], pts[f[2]]);
            let d2 = p.norm_squared();
            if best.as_ref().map_or(true, |(bd, ..)| d2 < *bd) {
                best = Some((d2, p, f, l));
            }
        }
    }
    if !outside_any {
        return (Vec3::zeros(), vec![0.25; 4], true);
    }
    let (_, p, f, l) = best.unwrap();
    let mut lambdas = vec![0.0; 4];
    for k in 0..3 {
        lambdas[f[k]] = l[k];
    }
    (p, lambdas, false)
}

/// Penetration depth as the minimum over unit directions `n` of the support
/// overlap `h_A(n) + h_B(-n)`: a coarse directional sweep followed by
/// shrinking tangent-plane grid refinement around the best candidates.
/// Returns the minimizing direction (from A into B) and the overlap, which
/// is the penetration depth when positive.
fn min_overlap_direction(q: &Query) -> (Vec3, f64) {
    let overlap = |n: Vec3| {
        q.shape_a.support_world(q.pose_a, n).dot(&n)
            - q.shape_b.support_world(q.pose_b, -n).dot(&n)
    };
    let coarse = coarse_directions();
    let mut scored: Vec<(f64, Vec3)> = coarse.iter().map(|&n| (overlap(n), n)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut best = scored[0];
    for &(f0, n0) in scored.iter().take(4) {
        let refined = refine_direction(&overlap, n0, f0);
        if refined.0 < best.0 {
            best = refined;
        }
    }
    (best.1, best.0)
}

/// Local minimization of the overlap on the direction sphere: a 5x5 tangent
/// grid around the incumbent, shrinking 4x whenever a sweep fails to
/// improve, down to ~1e-5 rad. Depth error is bounded by curvature times
/// the squared angular resolution, far below the 1e-4 m target.
fn refine_direction(overlap: &impl Fn(Vec3) -> f64, n0: Vec3, f0: f64) -> (f64, Vec3) {
    let mut best_n = n0;
    let mut best_f = f0;
    let mut step = 0.2f64;
    for _ in 0..48 {
        let t1 = orthogonal(best_n);
        let t2 = best_n.cross(&t1);
        let mut improved = false;
        for iu in -2i32..=2 {
            for iv in -2i32..=2 {
                if iu == 0 && iv == 0 {
                    continue;
                }
                let cand =
                    (best_n + t1 * (step * iu as f64) + t2 * (step * iv as f64)).normalize();
                let f = overlap(cand);
                if f < best_f {
                    best_f = f;
                    best_n = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.25;
            if step < 5e-6 {
                break;
            }
        }
    }
    (best_f, best_n)
}

fn coarse_directions() -> &'static [Vec3] {
    use std::sync::OnceLock;
    static DIRS: OnceLock<Vec<Vec3>> = OnceLock::new();
    DIRS.get_or_init(|| crate::geom::unit_sphere_pattern(256))
}

/// Builds up to four contact points. Flat support regions on both sides are
/// clipped against each other; a point against a face is projected onto it;
/// two smooth shapes keep the single witness pair.
#[allow(clippy::too_many_arguments)]
fn expand_manifold(
    q: &Query,
    normal: Vec3,
    depth: f64,
    pa: Vec3,
    pb: Vec3,
    margin: f64,
    scale: f64,
    body_a: usize,
    body_b: usize,
) -> Vec<ContactPoint> {
    let single = |pos: Vec3, d: f64| ContactPoint {
        position: pos,
        normal,
        depth: d,
        body_a,
        body_b,
    };
    // generous plane tolerance: the refined normal is accurate to ~1e-5
    // rad, so coplanar face vertices can deviate by extent * angle
    let face_tol = 2e-4 * scale.max(1e-3);
    let set_a = q.shape_a.support_set_world(q.pose_a, normal, face_tol);
    let set_b = q.shape_b.support_set_world(q.pose_b, -normal, face_tol);
    let plane_a = set_a.iter().map(|p| p.dot(&normal)).sum::<f64>() / set_a.len() as f64;
    let plane_b = set_b.iter().map(|p| p.dot(&normal)).sum::<f64>() / set_b.len() as f64;
    let gap = plane_a - plane_b; // the overlap along the normal

    match (set_a.len() >= 2, set_b.len() >= 2) {
        // two unique witnesses (smooth or vertex contact)
        (false, false) => vec![single((pa + pb) / 2.0, depth)],
        // B's point against A's flat support region
        (true, false) => {
            let p = set_b[0];
            vec![single(p + normal * (gap / 2.0), gap)]
        }
        // A's point against B's flat support region
        (false, true) => {
            let p = set_a[0];
            vec![single(p - normal * (gap / 2.0), gap)]
        }
        (true, true) => {
            // clip the two support polygons in the tangent plane
            let t1 = orthogonal(normal);
            let t2 = normal.cross(&t1);
            let origin = (pa + pb) / 2.0;
            let to2d = |p: &Vec3| ((p - origin).dot(&t1), (p - origin).dot(&t2));
            let (reference, incident) = if set_a.len() >= set_b.len() {
                (&set_a, &set_b)
            } else {
                (&set_b, &set_a)
            };
            let ref_poly = order_ccw(reference.iter().map(to2d).collect());
            let inc_poly = if incident.len() >= 3 {
                order_ccw(incident.iter().map(to2d).collect())
            } else {
                incident.iter().map(to2d).collect()
            };
            let clipped = clip_polygon(&inc_poly, &ref_poly);
            let mut candidates: Vec<ContactPoint> = clipped
                .into_iter()
                .map(|(u, v)| {
                    let w = origin + t1 * u + t2 * v;
                    let mid = w + normal * ((plane_a + plane_b) / 2.0 - w.dot(&normal));
                    single(mid, gap)
                })
                .filter(|c| c.depth >= -margin)
                .collect();
            if candidates.is_empty() {
                return vec![single((pa + pb) / 2.0, depth)];
            }
            reduce_points(&mut candidates);
            candidates
        }
    }
}

fn orthogonal(n: Vec3) -> Vec3 {
    let t = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    (t - n * t.dot(&n)).normalize()
}

fn order_ccw(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let c = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let c = (c.0 / pts.len() as f64, c.1 / pts.len() as f64);
    pts.sort_by(|a, b| {
        let aa = (a.1 - c.1).atan2(a.0 - c.0);
        let ab = (b.1 - c.1).atan2(b.0 - c.0);
        aa.partial_cmp(&ab).unwrap()
    });
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    pts
}

/// Sutherland-Hodgman clip of `subject` by convex `bound` (CCW).
fn clip_polygon(subject: &[(f64, f64)], bound: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if bound.len() < 3 {
        return subject.to_vec();
    }
    let mut out: Vec<(f64, f64)> = subject.to_vec();
    for i in 0..bound.len() {
        if out.is_empty() {
            break;
        }
        let (ax, ay) = bound[i];
        let (bx, by) = bound[(i + 1) % bound.len()];
        let inside = |p: &(f64, f64)| (bx - ax) * (p.1 - ay) - (by - ay) * (p.0 - ax) >= -1e-12;
        let input = std::mem::take(&mut out);
        if input.len() == 1 {
            if inside(&input[0]) {
                out = input;
            }
            continue;
        }
        for k in 0..input.len() {
            let cur = input[k];
            let prev = input[(k + input.len() - 1) % input.len()];
            let cur_in = inside(&cur);
            let prev_in = inside(&prev);
            if cur_in {
                if !prev_in {
                    if let Some(x) = intersect((prev, cur), ((ax, ay), (bx, by))) {
                        out.push(x);
                    }
                }
                out.push(cur);
            } else if prev_in {
                if let Some(x) = intersect((prev, cur), ((ax, ay), (bx, by))) {
                    out.push(x);
                }
            }
        }
        if input.len() == 2 {
            // segments need no wrap-around duplication
            out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }
    out
}

fn intersect(
    seg: ((f64, f64), (f64, f64)),
    line: ((f64, f64), (f64, f64)),
) -> Option<(f64, f64)> {
    let ((x1, y1), (x2, y2)) = seg;
    let ((x3, y3), (x4, y4)) = line;
    let denom = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4);
    if denom.abs() < 1e-18 {
        return None;
    }
    let t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / denom;
    Some((x1 + t * (x2 - x1), y1 + t * (y2 - y1)))
}

/// Keeps at most four points: deepest, then greedy spread maximization.
fn reduce_points(points: &mut Vec<ContactPoint>) {
    if points.len() <= 4 {
        points.sort_by(|a, b| b.depth.partial_cmp(&a.depth).unwrap());
        return;
    }
    let mut kept: Vec<ContactPoint> = Vec::with_capacity(4);
    let first = points
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.depth.partial_cmp(&b.depth).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    kept.push(points.swap_remove(first));
    let second = points
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            let da = (a.position - kept[0].position).norm_squared();
            let db = (b.position - kept[0].position).norm_squared();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    kept.push(points.swap_remove(second));
    for _ in 0..2 {
        if points.is_empty() {
            break;
        }
        let best = points
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                let sa = spread_gain(&kept, a);
                let sb = spread_gain(&kept, b);
                sa.partial_cmp(&sb).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        kept.push(points.swap_remove(best));
    }
    *points = kept;
    points.sort_by(|a, b| b.depth.partial_cmp(&a.depth).unwrap());
}

fn spread_gain(kept: &[ContactPoint], cand: &ContactPoint) -> f64 {
    kept.iter()
        .map(|k| (k.position - cand.position).norm_squared())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{convex_hull, Ellipsoid};
    use approx::assert_abs_diff_eq;

    fn ident() -> Isometry3<f64> {
        Isometry3::identity()
    }

    fn at(p: Vec3) -> Isometry3<f64> {
        Isometry3::translation(p.x, p.y, p.z)
    }

    fn sphere(r: f64) -> ConvexShape {
        ConvexShape::Ellipsoid(Ellipsoid::sphere(Vec3::zeros(), r).unwrap())
    }

    fn cube_hull(half: f64) -> ConvexShape {
        let mut pts = Vec::new();
        for &x in &[-half, half] {
            for &y in &[-half, half] {
                for &z in &[-half, half] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        ConvexShape::Hull(super::super::HullShape::new(pts).unwrap())
    }

#[test]
    fn separated_spheres_none() {
        let s = sphere(1.0);
        let m = detect_contacts(0, &s, &ident(), 1, &s, &at(Vec3::new(3.0, 0.0, 0.0)), 0.001)
            .unwrap();
        assert!(m.is_none());
    }

    #[test]
    fn overlapping_spheres_analytic() {
        let s = sphere(1.0);
        let m = detect_contacts(0, &s, &ident(), 1, &s, &at(Vec3::new(1.5, 0.0, 0.0)), 0.001)
            .unwrap()
            .unwrap();
        assert_eq!(m.points.len(), 1);
        let p = &m.points[0];
        assert_abs_diff_eq!(p.depth, 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!((p.normal - Vec3::new(1.0, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(p.position.x, 0.75, epsilon = 1e-3);
    }

    #[test]
    fn margin_contact_reports_negative_depth() {
        let s = sphere(1.0);
        let m = detect_contacts(0, &s, &ident(), 1, &s, &at(Vec3::new(2.0005, 0.0, 0.0)), 0.002)
            .unwrap()
            .unwrap();
        let p = &m.points[0];
        assert!(p.depth < 0.0 && p.depth > -0.002);
        assert_abs_diff_eq!(p.depth, -0.0005, epsilon = 1e-5);
        assert_abs_diff_eq!((p.normal - Vec3::new(1.0, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-5);
    }

    #[test]
    fn symmetry_of_depth_and_normal() {
        let mut rng = crate::test_rng(55);
        let cube = cube_hull(0.6);
        for _ in 0..30 {
            let e = crate::rand_ellipsoid(&mut rng);
            let shape = ConvexShape::Ellipsoid(e);
            let pose = at(crate::rand_vec3(&mut rng, 1.0));
            let ab = detect_contacts(0, &shape, &pose, 1, &cube, &ident(), 0.001).unwrap();
            let ba = detect_contacts(1, &cube, &ident(), 0, &shape, &pose, 0.001).unwrap();
            match (ab, ba) {
                (None, None) => {}
                (Some(m1), Some(m2)) => {
                    assert_abs_diff_eq!(m1.max_depth(), m2.max_depth(), epsilon = 1e-6);
                    let n1 = m1.points[0].normal;
                    let n2 = m2.points[0].normal;
                    assert_abs_diff_eq!((n1 + n2).norm(), 0.0, epsilon = 1e-3);
                }
                (a, b) => panic!("asymmetric results: {:?} vs {:?}", a.is_some(), b.is_some()),
            }
        }
    }

    #[test]
    fn ellipsoid_vs_cube_matches_brute_force() {
        // brute-force penetration: min over directions of support overlap
        let mut rng = crate::test_rng(56);
        let dirs = crate::geom::unit_sphere_pattern(1_000_000);
        for case in 0..4 {
            let e = Ellipsoid::new(
                Vec3::zeros(),
                Vec3::new(
                    rand::Rng::random_range(&mut rng, 0.3..0.8),
                    rand::Rng::random_range(&mut rng, 0.3..0.8),
                    rand::Rng::random_range(&mut rng, 0.3..0.8),
                ),
                crate::rand_vec3(&mut rng, 1.5),
            )
            .unwrap();
            let shape = ConvexShape::Ellipsoid(e);
            let cube = cube_hull(0.5);
            let offset = crate::rand_unit(&mut rng) * rand::Rng::random_range(&mut rng, 0.8..1.1);
            let pose = at(offset);

            let manifold =
                detect_contacts(0, &shape, &pose, 1, &cube, &ident(), 0.0).unwrap();
            let f = |d: Vec3| {
                let ha = shape.support_world(&pose, d).dot(&d);
                let hb = cube.support_world(&ident(), -d).dot(&-d);
                ha + hb
            };
            let (mut brute, mut bdir) = dirs
                .iter()
                .map(|d| (f(*d), *d))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap();
            // the sweep is only as sharp as its angular spacing; polish its
            // own argmin with a plain shrinking grid (still pure search)
            let mut h = 0.01;
            while h > 1e-6 {
                let mut better = false;
                for iu in -3i32..=3 {
                    for iv in -3i32..=3 {
                        let t1 = Vec3::new(bdir.y, -bdir.x, 0.3).cross(&bdir).normalize();
                        let t2 = bdir.cross(&t1);
                        let cand = (bdir + t1 * (h * iu as f64) + t2 * (h * iv as f64)).normalize();
                        let fc = f(cand);
                        if fc < brute {
                            brute = fc;
                            bdir = cand;
                            better = true;
                        }
                    }
                }
                if !better {
                    h *= 0.3;
                }
            }
            match manifold {
                Some(m) if m.max_depth() > 0.0 => {
                    assert!(brute > -1e-6, "case {case}: query overlaps, brute says separated");
                    assert_abs_diff_eq!(m.max_depth(), brute.max(0.0), epsilon = 1e-3);
                }
                _ => assert!(brute < 1e-3, "case {case}: query separated, brute depth {brute}"),
            }
        }
    }

    #[test]
    fn cube_on_slab_produces_spread_manifold() {
        let cube = cube_hull(0.1);
        let slab = cube_hull(1.0);
        // cube resting on top of the slab, 1 mm penetration
        let m = detect_contacts(
            0,
            &slab,
            &ident(),
            1,
            &cube,
            &at(Vec3::new(0.0, 1.099, 0.0)),
            0.001,
        )
        .unwrap()
        .unwrap();
        assert_eq!(m.points.len(), 4);
        for p in &m.points {
            assert_abs_diff_eq!(p.depth, 0.001, epsilon = 1e-4);
            assert_abs_diff_eq!((p.normal - Vec3::new(0.0, 1.0, 0.0)).norm(), 0.0, epsilon = 1e-4);
        }
        // points spread across the cube footprint
        let spread = (m.points[0].position - m.points[1].position).norm();
        assert!(spread > 0.15, "manifold spread {spread}");
    }

    #[test]
    fn deep_sphere_in_cube() {
        let s = sphere(0.2);
        let cube = cube_hull(0.5);
        let m = detect_contacts(0, &cube, &ident(), 1, &s, &at(Vec3::new(0.0, 0.45, 0.0)), 0.0)
            .unwrap()
            .unwrap();
        // sphere center 0.45, radius 0.2 -> lowest gap through +y face: 0.5 - 0.25 = 0.25
        assert_abs_diff_eq!(m.max_depth(), 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(
            (m.points[0].normal - Vec3::new(0.0, 1.0, 0.0)).norm(),
            0.0,
            epsilon = 1e-3
        );
    }

    #[test]
    fn hull_of_mesh_roundtrip_shapes() {
        let e = Ellipsoid::sphere(Vec3::zeros(), 0.3).unwrap();
        let mesh = convex_hull(&e.sample_surface(256)).unwrap();
        let hull = super::super::HullShape::new(mesh.vertices.clone()).unwrap();
        let shape = ConvexShape::Hull(hull);
        let m = detect_contacts(
            0,
            &shape,
            &ident(),
            1,
            &shape,
            &at(Vec3::new(0.45, 0.0, 0.0)),
            0.001,
        )
        .unwrap()
        .unwrap();
        assert_abs_diff_eq!(m.max_depth(), 0.15, epsilon = 5e-3);
    }
}
