use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{synthetic, GridSpec, HarnessError};
use crate::geometry::{load_mesh, MeshFormat, TriangleMesh};
use crate::optics::{CameraIntrinsics, CameraView, CostParams};
use crate::solver::{Method, SolverConfig};

/// Bundled generators selectable from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticMesh {
    /// Figure of capsules, feet at z = 0.
    CapsuleBody,
    /// Vertical capsule standing on z = 0.
    Capsule {
        radius: f64,
        height: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    Cylinder {
        radius: f64,
        height: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    Sphere {
        radius: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    /// Two walls with their own two-camera rig; the grid is ignored.
    SwapWalls,
}

fn default_segments() -> usize {
    64
}

impl SyntheticMesh {
    pub fn build(&self) -> Result<TriangleMesh, HarnessError> {
        let mesh = match *self {
            SyntheticMesh::CapsuleBody => synthetic::capsule_body()?,
            SyntheticMesh::Capsule { radius, height, segments } => {
                synthetic::capsule(Point3::new(0.0, 0.0, 0.5 * height), radius, height, segments, (segments / 8).max(2))?
            }
            SyntheticMesh::Cylinder { radius, height, segments } => {
                synthetic::cylinder(Point3::new(0.0, 0.0, 0.5 * height), radius, height, segments, (segments / 4).max(1))?
            }
            SyntheticMesh::Sphere { radius, segments } => {
                synthetic::uv_sphere(Point3::new(0.0, 0.0, radius), radius, segments, (segments / 2).max(2))?
            }
            SyntheticMesh::SwapWalls => synthetic::SwapScene::default().mesh()?,
        };
        Ok(mesh)
    }

    pub fn label(&self) -> &'static str {
        match self {
            SyntheticMesh::CapsuleBody => "capsule_body",
            SyntheticMesh::Capsule { .. } => "capsule",
            SyntheticMesh::Cylinder { .. } => "cylinder",
            SyntheticMesh::Sphere { .. } => "sphere",
            SyntheticMesh::SwapWalls => "swap_walls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<MeshFormat>,
    },
    Synthetic {
        synthetic: SyntheticMesh,
    },
}

impl MeshSource {
    pub fn load(&self) -> Result<TriangleMesh, HarnessError> {
        match self {
            MeshSource::File { path, format } => Ok(load_mesh(path, *format)?),
            MeshSource::Synthetic { synthetic } => synthetic.build(),
        }
    }

    /// Short name used for file prefixes and report rows.
    pub fn label(&self) -> String {
        match self {
            MeshSource::File { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mesh".into()),
            MeshSource::Synthetic { synthetic } => synthetic.label().into(),
        }
    }

    /// Cameras that come with the mesh instead of the grid.
    pub fn own_rig(&self) -> Option<Rig> {
        match self {
            MeshSource::Synthetic {
                synthetic: SyntheticMesh::SwapWalls,
            } => Some(Rig::Explicit(
                [0.0, -synthetic::SwapScene::default().setback]
                    .iter()
                    .map(|&y| CameraPose {
                        position: [0.0, y, 0.0],
                        target: [0.0, y + 1.0, 0.0],
                        up: [0.0, 0.0, 1.0],
                    })
                    .collect(),
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Camera placement: a cylindrical grid, or explicit poses that are all
/// mutually adjacent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rig {
    Grid(GridSpec),
    Explicit(Vec<CameraPose>),
}

impl Rig {
    pub fn explicit_cameras(poses: &[CameraPose], intrinsics: &CameraIntrinsics) -> Result<Vec<CameraView>, HarnessError> {
        poses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(CameraView::look_at(
                    i as u32,
                    Point3::from(p.position),
                    Point3::from(p.target),
                    Vector3::from(p.up),
                    *intrinsics,
                )?)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    #[default]
    Single,
    SamplingDensity,
    GridSweep,
    OverlapStudy,
    TupleSize,
}

/// Parameters of the study modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyOptions {
    /// Sample-count exponents for the sampling-density study.
    pub sample_exponents: Vec<u32>,
    pub reseeds: usize,
    /// Camera budgets for the grid sweep.
    pub camera_budgets: Vec<usize>,
    /// Smallest number of grid rows or columns considered in the sweep.
    pub min_grid_side: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            sample_exponents: (7..=13).collect(),
            reseeds: 10,
            camera_budgets: vec![60, 120, 240],
            min_grid_side: 3,
        }
    }
}

/// One experiment, read from a single JSON document. Relative paths are
/// resolved against the document's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub meshes: Vec<MeshSource>,
    pub grid: GridSpec,
    /// Overrides the grid when present.
    pub cameras: Option<Vec<CameraPose>>,
    pub cost: CostParams,
    pub intrinsics: CameraIntrinsics,
    pub solver: SolverConfig,
    pub methods: Vec<Method>,
    pub samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mode: ExperimentMode,
    pub study: StudyOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            meshes: vec![MeshSource::Synthetic {
                synthetic: SyntheticMesh::CapsuleBody,
            }],
            grid: GridSpec::default(),
            cameras: None,
            cost: CostParams::default(),
            intrinsics: CameraIntrinsics::default(),
            solver: SolverConfig::default(),
            methods: Method::ALL.to_vec(),
            samples: 1024,
            seed: 7,
            output_dir: PathBuf::from("out"),
            mode: ExperimentMode::Single,
            study: StudyOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for mesh in &mut self.meshes {
            if let MeshSource::File { path, .. } = mesh {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.meshes.is_empty() {
            return Err(HarnessError::Config("no meshes given".into()));
        }
        for mesh in &self.meshes {
            if let MeshSource::File { path, .. } = mesh {
                if !path.exists() {
                    return Err(HarnessError::Config(format!("mesh {} does not exist", path.display())));
                }
            }
        }
        if self.samples == 0 {
            return Err(HarnessError::Config("sample count must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods selected".into()));
        }
        if self.study.reseeds == 0 {
            return Err(HarnessError::Config("reseeds must be at least 1".into()));
        }
        self.grid.validate()?;
        self.cost.validate()?;
        self.intrinsics.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Rig for `mesh`: its own cameras if it has them, then explicit poses,
    /// then the grid.
    pub fn rig_for(&self, mesh: &MeshSource) -> Rig {
        mesh.own_rig()
            .or_else(|| self.cameras.clone().map(Rig::Explicit))
            .unwrap_or_else(|| Rig::Grid(self.grid.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"meshes": [{"path": "body.obj"}, {"synthetic": {"kind": "capsule", "radius": 150, "height": 1700}}],
                "grid": {"angular": 12, "vertical": 3, "radius": 800},
                "solver": {"k": 3}, "mode": "grid-sweep"}"#,
        )
        .unwrap();
        assert_eq!(c.meshes.len(), 2);
        assert_eq!(c.meshes[0].label(), "body");
        assert_eq!(c.meshes[1].label(), "capsule");
        assert_eq!(c.solver.k, 3);
        assert_eq!(c.solver.max_iterations, 50);
        assert_eq!(c.mode, ExperimentMode::GridSweep);
        assert_eq!(c.samples, 1024);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sample": 10}"#).is_err());
    }

    #[test]
    fn missing_mesh_file_fails_validation() {
        let c = ExperimentConfig {
            meshes: vec![MeshSource::File {
                path: "/nonexistent/mesh.obj".into(),
                format: None,
            }],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn swap_walls_bring_their_own_cameras() {
        let c = ExperimentConfig::default();
        let walls = MeshSource::Synthetic {
            synthetic: SyntheticMesh::SwapWalls,
        };
        match c.rig_for(&walls) {
            Rig::Explicit(p) => assert_eq!(p.len(), 2),
            Rig::Grid(_) => panic!("expected explicit rig"),
        }
        assert!(matches!(c.rig_for(&c.meshes[0]), Rig::Grid(_)));
    }
}
