//! Scene assembly, experiment drivers and report files.

pub mod config;
pub mod experiment;
pub mod export;
pub mod grid;
pub mod synthetic;

pub use config::{ExperimentConfig, ExperimentMode, MeshSource, Rig, StudyOptions, SyntheticMesh};
pub use experiment::{run_experiment, RunSummary, Scene};
pub use export::{export_camera_pointcloud, export_cost_pointcloud, read_cost_pointcloud};
pub use grid::{generate_cylindrical_grid, GridSpec};

use crate::assignment::AssignmentError;
use crate::geometry::GeometryError;
use crate::optics::OpticsError;
use crate::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("grid: {0}")]
    Grid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
