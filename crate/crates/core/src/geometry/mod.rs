//! Meshes, surface sampling, and point-to-mesh distance queries.

mod index;
mod mesh;
mod obj;
mod sampling;

use std::path::PathBuf;

pub use index::{DistanceQueryIndex, SignedDistance, SURFACE_TOLERANCE};
pub use mesh::{load_mesh, CleanupReport, PartLabels, TriangleMesh, MERGE_TOLERANCE};
pub use sampling::{sample_surface, SurfaceSampleSet};

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("OBJ parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("mesh schema error: {0}")]
    Schema(String),
    #[error("mesh has no faces")]
    Empty,
}
