//! Mesh ingestion, area-uniform surface sampling and occlusion-aware
//! visibility between cameras and surface samples.

mod bvh;
mod mesh;
mod sampling;
mod visibility;

pub use bvh::{segment_blocked_brute_force, Bvh};
pub use mesh::{load_mesh, MeshFormat, Orientation, TriangleMesh, DEGENERATE_AREA};
pub use sampling::{sample_surface, SurfaceSample};
pub use visibility::{
    build_visibility, build_visibility_with, visibility_clauses, OcclusionBackend, VisibilityClauses,
    VisibilityMeta, VisibilityTable, OCCLUSION_OFFSET,
};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("mesh has no usable triangles")]
    EmptyMesh,
    #[error("mesh surface area is zero")]
    ZeroArea,
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("triangle {triangle} references vertex {index} but only {vertex_count} exist")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("cannot infer mesh format from '{0}'")]
    UnknownFormat(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("visibility cache mismatch: {0}")]
    CacheMismatch(String),
}
