//! Result bundles: the optimization result, recomputable contact metrics,
//! the hand hull and posed object meshes, and the cost trace. Metrics are
//! re-derived from the bundled states before writing so a tampered bundle
//! cannot be exported.

use super::{IoError, LoadedScene};
use crate::contact::{
    intersection_volume_ellipsoids, max_penetration, ConvexShape, HullShape,
};
use crate::geom::{convex_hull, ellipsoids_to_mesh, TriMesh, SAMPLE_PATTERN_SIZE};
use crate::hand::compose_state;
use crate::optimizer::OptResult;
use crate::stability::simulation_displacement;
use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Contact-quality metrics of the optimized state: maximum hand-object
/// penetration (mm), intersection volume (cm^3), simulation displacement
/// (mm), and the stability cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub max_pene_mm: f64,
    pub inter_cm3: f64,
    pub disp_mm: f64,
    pub sc: f64,
}

/// Everything an optimization run produces, exportable as five files.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub opt: OptResult,
    pub metrics: MetricsRecord,
    /// Convex hull of the optimized hand (min-union retention then hull).
    pub hand_mesh: TriMesh,
    /// Object mesh posed at the post-rollout pose.
    pub object_mesh: TriMesh,
    pub trace_csv: String,
}

const VOXEL_PITCH: f64 = 0.001;

fn compute_metrics(scene: &LoadedScene, opt: &OptResult) -> Result<MetricsRecord, IoError> {
    let state = compose_state(
        &scene.template,
        &scene.beta,
        &opt.best_vartheta.to_pose(),
        &scene.phi,
        opt.best_root,
    )?;
    // posed object shape at the final rollout pose
    let pose = Isometry3::from_parts(opt.best_object_pos.into(), opt.best_object_rot);
    let hull = convex_hull(&scene.object_mesh.vertices)?;
    let object_shape = ConvexShape::Hull(HullShape::new(hull.vertices)?);
    let link_shapes: Vec<(ConvexShape, Isometry3<f64>)> = state
        .links
        .iter()
        .map(|e| (ConvexShape::Ellipsoid(*e), Isometry3::identity()))
        .collect();
    let max_pene_mm = max_penetration(&link_shapes, &object_shape, &pose)? * 1000.0;
    let posed_mesh = scene
        .object_mesh
        .transformed(&opt.best_object_rot.to_rotation_matrix(), opt.best_object_pos);
    let inter_cm3 = intersection_volume_ellipsoids(&state.links, &posed_mesh, VOXEL_PITCH)?;
    Ok(MetricsRecord {
        max_pene_mm,
        inter_cm3,
        disp_mm: simulation_displacement(&opt.best_record),
        sc: opt.best_cost.total,
    })
}

fn trace_csv(opt: &OptResult) -> String {
    let mut out = String::from("iteration,iter_best,best_so_far,failed,clamped\n");
    for t in &opt.trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.iteration, t.iter_best, t.best_so_far, t.failed, t.clamped
        ));
    }
    out
}

impl ResultBundle {
    /// Builds the bundle from an optimization result, computing metrics and
    /// meshes from the optimized state.
    pub fn assemble(scene: &LoadedScene, opt: OptResult) -> Result<ResultBundle, IoError> {
        let metrics = compute_metrics(scene, &opt)?;
        let state = compose_state(
            &scene.template,
            &scene.beta,
            &opt.best_vartheta.to_pose(),
            &scene.phi,
            opt.best_root,
        )?;
        let hand_mesh = ellipsoids_to_mesh(&state.links, SAMPLE_PATTERN_SIZE)?;
        let object_mesh = scene
            .object_mesh
            .transformed(&opt.best_object_rot.to_rotation_matrix(), opt.best_object_pos);
        let trace_csv = trace_csv(&opt);
        Ok(ResultBundle { opt, metrics, hand_mesh, object_mesh, trace_csv })
    }

    /// Writes result.json, metrics.json, cost_trace.csv, hand.obj, and
    /// object.obj into `dir`. Metrics are recomputed from the bundled
    /// states first; a mismatch aborts the export.
    pub fn export(&self, scene: &LoadedScene, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
        let recomputed = compute_metrics(scene, &self.opt)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        if !(close(recomputed.max_pene_mm, self.metrics.max_pene_mm)
            && close(recomputed.inter_cm3, self.metrics.inter_cm3)
            && close(recomputed.disp_mm, self.metrics.disp_mm)
            && close(recomputed.sc, self.metrics.sc))
        {
            return Err(IoError::InconsistentMetrics(format!(
                "stored {:?} vs recomputed {recomputed:?}",
                self.metrics
            )));
        }
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let write = |name: &str, contents: String| -> Result<PathBuf, IoError> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|source| IoError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        };
        let mut files = Vec::with_capacity(5);
        files.push(write(
            "result.json",
            serde_json::to_string_pretty(&self.opt).map_err(|e| IoError::Schema(e.to_string()))?,
        )?);
        files.push(write(
            "metrics.json",
            serde_json::to_string_pretty(&self.metrics)
                .map_err(|e| IoError::Schema(e.to_string()))?,
        )?);
        files.push(write("cost_trace.csv", self.trace_csv.clone())?);
        let mut hand = Vec::new();
        self.hand_mesh.write_obj(&mut hand)?;
        files.push(write("hand.obj", String::from_utf8(hand).unwrap())?);
        let mut object = Vec::new();
        self.object_mesh.write_obj(&mut object)?;
        files.push(write("object.obj", String::from_utf8(object).unwrap())?);
        Ok(files)
    }
}
