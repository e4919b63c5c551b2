//! Ellipsoid primitives, triangle meshes, convex hulls, oriented bounding
//! boxes, and conversions between implicit ellipsoid sets and explicit
//! surface meshes. All quantities are SI (meters, kilograms).

mod convert;
mod ellipsoid;
mod hull;
mod mesh;
mod obb;

pub use convert::{ellipsoids_to_mesh, mesh_to_ellipsoids, EQ3_RETENTION_TOL};
pub use ellipsoid::{unit_sphere_pattern, Ellipsoid, SAMPLE_PATTERN_SIZE};
pub use hull::convex_hull;
pub use mesh::{RigidBodyProps, TriMesh};
pub use obb::{fit_obb, Obb};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid radii {0:?}: each must be finite and > 0")]
    InvalidRadii([f64; 3]),
    #[error("zero direction vector")]
    ZeroDirection,
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("degenerate segment {label}: {reason}")]
    DegenerateSegment { label: usize, reason: String },
    #[error("segment label {0} out of range 1..=16")]
    LabelOutOfRange(usize),
    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("empty input")]
    EmptyInput,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("obj parse error at line {line}: {msg}")]
    ObjParse { line: usize, msg: String },
}
