//! Python module `pyfocusplan`.

use std::path::PathBuf;

use focusplan::harness::config::{ExperimentConfig, MeshSource, Rig, SyntheticMesh};
use focusplan::harness::{run_experiment, GridSpec, Scene};
use focusplan::optics::{dof_limits as dof, focus_interval_for_depth, CameraIntrinsics, CostParams, FarLimit};
use focusplan::solver::{InitPolicy, Method, SolverConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn intrinsics(hyperfocal: f64, focal_length: f64) -> CameraIntrinsics {
    CameraIntrinsics {
        hyperfocal,
        focal_length,
        ..Default::default()
    }
}

fn far(limit: FarLimit) -> f64 {
    limit.finite().unwrap_or(f64::INFINITY)
}

/// Near and far depth-of-field limits (mm) at focus distance `s`.
#[pyfunction]
#[pyo3(signature = (s, hyperfocal = 10_000.0, focal_length = 50.0))]
fn dof_limits(s: f64, hyperfocal: f64, focal_length: f64) -> PyResult<(f64, f64)> {
    let l = dof(s, &intrinsics(hyperfocal, focal_length)).map_err(err)?;
    Ok((l.near, far(l.far)))
}

/// Focus distances (mm) that keep depth `d` sharp.
#[pyfunction]
#[pyo3(signature = (d, hyperfocal = 10_000.0, focal_length = 50.0))]
fn focus_interval(d: f64, hyperfocal: f64, focal_length: f64) -> PyResult<(f64, f64)> {
    let iv = focus_interval_for_depth(d, &intrinsics(hyperfocal, focal_length)).map_err(err)?;
    Ok((iv.lo, far(iv.hi)))
}

fn parse_method(name: &str) -> PyResult<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| err(format!("unknown method {name:?}")))
}

fn parse_init(name: &str) -> PyResult<InitPolicy> {
    match name {
        "closest" => Ok(InitPolicy::Closest),
        "avg" => Ok(InitPolicy::Avg),
        "midrange" => Ok(InitPolicy::Midrange),
        _ => Err(err(format!("unknown init policy {name:?}"))),
    }
}

fn synthetic(kind: &str) -> PyResult<SyntheticMesh> {
    Ok(match kind {
        "capsule_body" => SyntheticMesh::CapsuleBody,
        "capsule" => SyntheticMesh::Capsule {
            radius: 150.0,
            height: 1700.0,
            segments: 64,
        },
        "cylinder" => SyntheticMesh::Cylinder {
            radius: 150.0,
            height: 1700.0,
            segments: 64,
        },
        "sphere" => SyntheticMesh::Sphere {
            radius: 300.0,
            segments: 64,
        },
        "swap_walls" => SyntheticMesh::SwapWalls,
        _ => return Err(err(format!("unknown synthetic mesh {kind:?}"))),
    })
}

/// A subject, its camera rig, surface samples and visibility.
#[pyclass(name = "Scene", module = "pyfocusplan")]
struct PyScene {
    inner: Scene,
}

impl PyScene {
    fn build(source: MeshSource, angular: usize, vertical: usize, radius: f64, samples: usize, seed: u64) -> PyResult<Self> {
        let mesh = source.load().map_err(err)?;
        let rig = source.own_rig().unwrap_or(Rig::Grid(GridSpec {
            angular,
            vertical,
            radius,
            extent: None,
        }));
        let inner = Scene::build(
            source.label(),
            mesh,
            &rig,
            &CameraIntrinsics::default(),
            &CostParams::default(),
            samples,
            seed,
        )
        .map_err(err)?;
        Ok(Self { inner })
    }
}

#[pymethods]
impl PyScene {
    /// Bundled mesh: capsule_body, capsule, cylinder, sphere or swap_walls.
    #[staticmethod]
    #[pyo3(signature = (kind = "capsule_body", angular = 24, vertical = 7, radius = 750.0, samples = 1024, seed = 7))]
    fn synthetic(kind: &str, angular: usize, vertical: usize, radius: f64, samples: usize, seed: u64) -> PyResult<Self> {
        let source = MeshSource::Synthetic {
            synthetic: synthetic(kind)?,
        };
        Self::build(source, angular, vertical, radius, samples, seed)
    }

    /// OBJ or PLY mesh in millimetres.
    #[staticmethod]
    #[pyo3(signature = (path, angular = 24, vertical = 7, radius = 750.0, samples = 1024, seed = 7))]
    fn from_mesh(path: PathBuf, angular: usize, vertical: usize, radius: f64, samples: usize, seed: u64) -> PyResult<Self> {
        Self::build(MeshSource::File { path, format: None }, angular, vertical, radius, samples, seed)
    }

    #[getter]
    fn num_cameras(&self) -> usize {
        self.inner.cameras.len()
    }

    #[getter]
    fn num_samples(&self) -> usize {
        self.inner.samples.len()
    }

    /// Samples seen by each camera.
    fn visible_counts(&self) -> Vec<usize> {
        self.inner.visibility.per_camera_counts()
    }

    /// Total cost with the focus term dropped.
    fn lower_bound(&self) -> f64 {
        self.inner.lower_bound()
    }

    /// Runs `method` (closest, avg, em, kview); returns total, mean,
    /// per-camera focus, per-sample assignment and the cost trace.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (method = "kview", k = 2, max_iters = 50, tol = 1e-6, init = "avg", ring = 1))]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        k: usize,
        max_iters: usize,
        tol: f64,
        init: &str,
        ring: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let config = SolverConfig {
            k,
            max_iterations: max_iters,
            tolerance: tol,
            init: parse_init(init)?,
            ring,
            ..Default::default()
        };
        let method = parse_method(method)?;
        let s = py.detach(|| self.inner.solve(method, &config)).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("method", method.name())?;
        out.set_item("total", s.report.total)?;
        out.set_item("mean", s.report.mean)?;
        out.set_item("in_focus_area", s.report.in_focus_area)?;
        out.set_item("focus", s.plan.focus)?;
        out.set_item("assignment", s.plan.assignment)?;
        let trace: Vec<(usize, &str, f64)> = s.trace.iter().map(|e| (e.iteration, e.phase.name(), e.total)).collect();
        out.set_item("trace", trace)?;
        Ok(out)
    }
}

/// Runs an experiment from a JSON config; returns the written file paths.
#[pyfunction]
fn run_config(py: Python<'_>, path: PathBuf) -> PyResult<Vec<String>> {
    let config = ExperimentConfig::from_file(&path).map_err(err)?;
    let summary = py.detach(|| run_experiment(&config)).map_err(err)?;
    Ok(summary.files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn pyfocusplan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dof_limits, m)?)?;
    m.add_function(wrap_pyfunction!(focus_interval, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<PyScene>()?;
    Ok(())
}
