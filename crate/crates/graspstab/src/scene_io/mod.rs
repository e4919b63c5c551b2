//! Scene files, the object catalog, result bundles, and the command-line
//! entry points. Scenes are JSON with SI units; meshes are Wavefront OBJ.

mod bundle;
mod catalog;
pub mod cli;

pub use bundle::{MetricsRecord, ResultBundle};
pub use catalog::{load_catalog, CatalogEntry, ObjectCatalog, SUSPECT_MASS_IDS};

use crate::geom::{RigidBodyProps, TriMesh};
use crate::hand::{
    compose_state, DofLayout, HandState, HandTemplate, JointLimits, ObjectParams, ShapeParams,
    Vartheta,
};
use crate::optimizer::{EvalContext, SamplerConfig};
use crate::sim::SimConfig;
use crate::stability::{GravityAccounting, TargetKinematics};
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown catalog id '{0}'")]
    UnknownCatalogId(String),
    #[error("scene validation: {0}")]
    Validation(String),
    #[error("result bundle metrics are not self-consistent: {0}")]
    InconsistentMetrics(String),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
    #[error(transparent)]
    Hand(#[from] crate::hand::HandError),
    #[error(transparent)]
    Contact(#[from] crate::contact::ContactError),
}

/// Reference to the hand template: the builtin default, a file, or an
/// inline template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateRef {
    Name(String),
    File { file: PathBuf },
    Inline(HandTemplate),
}

impl Default for TemplateRef {
    fn default() -> Self {
        TemplateRef::Name("default".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// Object mesh path, relative to the scene file.
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restitution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_kgm3: Option<f64>,
}

/// A hand-object scene: template reference, state parameters, object
/// physical attributes, and simulation/sampling overrides. Unknown fields
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub template: TemplateRef,
    /// Per-link radii deltas (m), 16 triples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<[f64; 3]>>,
    /// Flat pose vector with its layout tag.
    pub theta: Vartheta,
    /// Object ellipsoid parameters relative to the palm.
    pub phi: ObjectParams,
    #[serde(default)]
    pub root_t: [f64; 3],
    pub object: ObjectSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<JointLimits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A fully resolved scene: template validated, mesh loaded, physical
/// properties and config defaults filled in.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub spec: SceneSpec,
    pub template: HandTemplate,
    pub beta: ShapeParams,
    pub theta: Vartheta,
    pub phi: ObjectParams,
    pub root_t: Vec3,
    pub object_mesh: TriMesh,
    pub props: RigidBodyProps,
    pub sim: SimConfig,
    pub sampler: SamplerConfig,
    pub limits: JointLimits,
    pub warnings: Vec<String>,
}

/// Parses a scene file without resolving it.
pub fn read_spec(path: &Path) -> Result<SceneSpec, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

/// Parses scene JSON; schema errors name the offending field.
pub fn parse_spec(text: &str) -> Result<SceneSpec, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| IoError::Schema(format!("{}: {}", e.path(), e.inner())))
}

pub fn write_spec(spec: &SceneSpec, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(spec)
        .map_err(|e| IoError::Schema(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and resolves a scene file: reads the template and object mesh and
/// fills defaults (friction 0.8, restitution 1.0, density 500 kg/m^3 when
/// no mass is given; catalog attributes injected by id, explicit scene
/// values winning).
pub fn load_scene(path: &Path) -> Result<LoadedScene, IoError> {
    let spec = read_spec(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mesh_path = base.join(&spec.object.mesh);
    let mesh = TriMesh::read_obj_file(&mesh_path).map_err(|e| match e {
        crate::geom::GeomError::Io(source) => IoError::Io { path: mesh_path.clone(), source },
        other => IoError::Geom(other),
    })?;
    resolve_scene(spec, mesh, Some(base))
}

/// Resolves a parsed spec against an already-loaded object mesh.
pub fn resolve_scene(
    spec: SceneSpec,
    object_mesh: TriMesh,
    base_dir: Option<&Path>,
) -> Result<LoadedScene, IoError> {
    let mut warnings = Vec::new();

    let template = match &spec.template {
        TemplateRef::Name(name) if name == "default" => HandTemplate::default(),
        TemplateRef::Name(other) => {
            return Err(IoError::Validation(format!(
                "unknown template name '{other}' (only 'default' is builtin)"
            )))
        }
        TemplateRef::File { file } => {
            let path = base_dir.unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|source| IoError::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| IoError::Schema(e.to_string()))?
        }
        TemplateRef::Inline(t) => t.clone(),
    };
    template.validate()?;

    let beta = match &spec.beta {
        None => ShapeParams::zeros(),
        Some(d) => {
            if d.len() != 16 {
                return Err(IoError::Validation(format!(
                    "beta needs 16 triples, got {}",
                    d.len()
                )));
            }
            ShapeParams { deltas: d.clone() }
        }
    };
    if spec.theta.values.len() != spec.theta.layout.len() {
        return Err(IoError::Validation(format!(
            "theta has {} values but layout {:?} needs {}",
            spec.theta.values.len(),
            spec.theta.layout,
            spec.theta.layout.len()
        )));
    }

    if !object_mesh.is_watertight() {
        return Err(IoError::Validation("object mesh is not watertight".into()));
    }
    let unit_props = object_mesh.mass_props(1.0)?;
    let volume = unit_props.mass;

    let catalog = load_catalog();
    let entry = match &spec.object.catalog_id {
        Some(id) => {
            let e = catalog
                .get(id)
                .ok_or_else(|| IoError::UnknownCatalogId(id.clone()))?;
            if catalog.is_suspect_mass(id) {
                warnings.push(format!(
                    "catalog id {id}: tabulated mass {} g is likely a units slip in the source; \
                     override with object.mass_g if needed",
                    e.mass_g
                ));
            }
            Some(*e)
        }
        None => None,
    };

    let mass = match (spec.object.mass_g, &entry) {
        (Some(g), _) => g * 1e-3,
        (None, Some(e)) => e.mass_kg(),
        (None, None) => spec.object.density_kgm3.unwrap_or(500.0) * volume,
    };
    if !(mass > 0.0) {
        return Err(IoError::Validation(format!("resolved object mass {mass} kg")));
    }
    let props = RigidBodyProps {
        mass,
        com: unit_props.com,
        inertia: unit_props.inertia * (mass / volume),
    };

    let mut sim = spec.sim.clone().unwrap_or_default();
    if let Some(f) = spec.object.friction.or(entry.map(|e| e.friction)) {
        sim.friction = f;
    }
    if let Some(r) = spec.object.restitution {
        sim.restitution = r;
    }
    sim.validate()
        .map_err(|e| IoError::Validation(e.to_string()))?;

    let mut sampler = spec.sampler.clone().unwrap_or_default();
    sampler.layout = spec.theta.layout;
    if let Some(seed) = spec.seed {
        sampler.seed = seed;
    }
    sampler
        .validate()
        .map_err(|e| IoError::Validation(e.to_string()))?;

    let limits = spec.limits.unwrap_or_default();
    let theta = spec.theta.clone();
    let phi = spec.phi;
    let root_t = Vec3::from(spec.root_t);

    Ok(LoadedScene {
        spec,
        template,
        beta,
        theta,
        phi,
        root_t,
        object_mesh,
        props,
        sim,
        sampler,
        limits,
        warnings,
    })
}

impl LoadedScene {
    /// The hand-object state at the scene's own parameters.
    pub fn center_state(&self) -> Result<HandState, IoError> {
        Ok(compose_state(
            &self.template,
            &self.beta,
            &self.theta.to_pose(),
            &self.phi,
            self.root_t,
        )?)
    }

    /// Evaluation context for the optimizer.
    pub fn eval_context(&self) -> Result<EvalContext, IoError> {
        let state = self.center_state()?;
        let char_len = state.object.radii().mean();
        Ok(EvalContext {
            template: self.template.clone(),
            beta: self.beta.clone(),
            phi: self.phi,
            center: self.theta.clone(),
            object_mesh: self.object_mesh.clone(),
            props: self.props,
            sim: self.sim.clone(),
            limits: self.limits,
            kinematics: TargetKinematics::default(),
            accounting: GravityAccounting::default(),
            char_len,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Ellipsoid;

    fn ball(r: f64) -> TriMesh {
        let e = Ellipsoid::sphere(Vec3::zeros(), r).unwrap();
        crate::geom::convex_hull(&e.sample_surface(128)).unwrap()
    }

    fn minimal_json() -> String {
        r#"{
            "template": "default",
            "theta": {"layout": "reduced", "values": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]},
            "phi": {"radii_delta": [-0.02, 0.01, -0.02], "axis_angle": [0,0,0], "center_offset": [0, 0.2, 0]},
            "object": {"mesh": "ball.obj"}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scene_gets_defaults() {
        let spec = parse_spec(&minimal_json()).unwrap();
        let scene = resolve_scene(spec, ball(0.025), None).unwrap();
        assert_eq!(scene.sim.friction, 0.8);
        assert_eq!(scene.sim.restitution, 1.0);
        // density 500 applied to the mesh volume
        let vol = scene.object_mesh.signed_volume(Vec3::zeros());
        assert!((scene.props.mass - 500.0 * vol).abs() < 1e-12);
        assert_eq!(scene.sampler.iterations, 30);
        assert!(scene.warnings.is_empty());
    }

    #[test]
    fn catalog_injection() {
        let mut spec = parse_spec(&minimal_json()).unwrap();
        spec.object.catalog_id = Some("C0".into());
        let scene = resolve_scene(spec, ball(0.025), None).unwrap();
        assert!((scene.props.mass - 0.0871).abs() < 1e-12);
        assert!((scene.sim.friction - 0.689).abs() < 1e-12);

        // explicit scene values win over the catalog
        let mut spec2 = parse_spec(&minimal_json()).unwrap();
        spec2.object.catalog_id = Some("C0".into());
        spec2.object.friction = Some(0.5);
        spec2.object.mass_g = Some(42.0);
        let scene2 = resolve_scene(spec2, ball(0.025), None).unwrap();
        assert!((scene2.props.mass - 0.042).abs() < 1e-12);
        assert!((scene2.sim.friction - 0.5).abs() < 1e-12);

        let mut spec3 = parse_spec(&minimal_json()).unwrap();
        spec3.object.catalog_id = Some("ZZ".into());
        assert!(matches!(
            resolve_scene(spec3, ball(0.025), None),
            Err(IoError::UnknownCatalogId(_))
        ));
    }

    #[test]
    fn suspect_catalog_mass_warns() {
        let mut spec = parse_spec(&minimal_json()).unwrap();
        spec.object.catalog_id = Some("A2".into());
        let scene = resolve_scene(spec, ball(0.025), None).unwrap();
        assert_eq!(scene.warnings.len(), 1);
        assert!(scene.warnings[0].contains("A2"));
    }

    #[test]
    fn malformed_field_is_named() {
        let bad = minimal_json().replace(r#""mesh": "ball.obj""#, r#""mesh": "ball.obj", "mass_g": "heavy""#);
        let err = parse_spec(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mass_g"), "error was: {msg}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = minimal_json().replace(r#""template": "default","#, r#""template": "default", "spin": 3,"#);
        let err = parse_spec(&bad).unwrap_err();
        assert!(err.to_string().contains("spin"), "error was: {err}");
    }

    #[test]
    fn roundtrip_write_read() {
        let spec = parse_spec(&minimal_json()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        write_spec(&spec, &p).unwrap();
        let back = read_spec(&p).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn seed_overrides_sampler() {
        let with_seed = minimal_json().replace(
            r#""object": {"mesh": "ball.obj"}"#,
            r#""object": {"mesh": "ball.obj"}, "seed": 99"#,
        );
        let spec = parse_spec(&with_seed).unwrap();
        let scene = resolve_scene(spec, ball(0.025), None).unwrap();
        assert_eq!(scene.sampler.seed, 99);
    }
}
