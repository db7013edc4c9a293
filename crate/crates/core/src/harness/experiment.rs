use std::collections::VecDeque;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentMode, MeshSource, Rig};
use super::export::{export_camera_pointcloud, export_cost_pointcloud};
use super::{generate_cylindrical_grid, GridSpec, HarnessError};
use crate::assignment::{assigned_cost, lower_bound, CostCache, CostReport, FocusPlan};
use crate::geometry::{build_visibility, sample_surface, SurfaceSample, TriangleMesh, VisibilityTable};
use crate::optics::{CameraIntrinsics, CameraView, CostParams};
use crate::solver::{
    em_optimize, initial_focus, kview_optimize, kview_step, measure_overlap, solve, CameraGraph, CameraTuple, Method,
    Solution, SolverConfig, TraceEntry,
};

/// Everything the optimizers need for one subject and rig.
#[derive(Debug, Clone)]
pub struct Scene {
    pub label: String,
    pub mesh: TriangleMesh,
    pub samples: Vec<SurfaceSample>,
    pub cameras: Vec<CameraView>,
    pub graph: CameraGraph,
    pub visibility: VisibilityTable,
    pub cache: CostCache,
    pub params: CostParams,
    /// Vertical range of the grid, when the rig is a grid.
    pub extent: Option<[f64; 2]>,
}

impl Scene {
    pub fn build(
        label: impl Into<String>,
        mesh: TriangleMesh,
        rig: &Rig,
        intrinsics: &CameraIntrinsics,
        params: &CostParams,
        samples: usize,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let (cameras, graph, extent) = match rig {
            Rig::Grid(spec) => {
                let (cams, graph) = generate_cylindrical_grid(spec, &mesh, intrinsics)?;
                (cams, graph, Some(spec.resolved_extent(&mesh)))
            }
            Rig::Explicit(poses) => {
                let cams = Rig::explicit_cameras(poses, intrinsics)?;
                let graph = CameraGraph::complete(cams.len());
                (cams, graph, None)
            }
        };
        Self::assemble(label.into(), mesh, cameras, graph, params, samples, seed, extent)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        label: String,
        mesh: TriangleMesh,
        cameras: Vec<CameraView>,
        graph: CameraGraph,
        params: &CostParams,
        samples: usize,
        seed: u64,
        extent: Option<[f64; 2]>,
    ) -> Result<Self, HarnessError> {
        let samples = sample_surface(&mesh, samples, seed)?;
        let visibility = build_visibility(&mesh, &samples, &cameras);
        let blind = visibility.blind_cameras();
        if !blind.is_empty() {
            log::warn!("{label}: {} of {} cameras see no samples", blind.len(), cameras.len());
        }
        let cache = CostCache::build(&samples, &cameras, &visibility, params)?;
        Ok(Self {
            label,
            mesh,
            samples,
            cameras,
            graph,
            visibility,
            cache,
            params: *params,
            extent,
        })
    }

    /// Same mesh and rig with a fresh sample set.
    pub fn resampled(&self, samples: usize, seed: u64) -> Result<Self, HarnessError> {
        Self::assemble(
            self.label.clone(),
            self.mesh.clone(),
            self.cameras.clone(),
            self.graph.clone(),
            &self.params,
            samples,
            seed,
            self.extent,
        )
    }

    pub fn lower_bound(&self) -> f64 {
        lower_bound(&self.cache)
    }

    pub fn solve(&self, method: Method, config: &SolverConfig) -> Result<Solution, HarnessError> {
        Ok(solve(method, config, &self.cache, &self.graph)?)
    }

    /// Cost of every sample under `plan`.
    pub fn sample_costs(&self, plan: &FocusPlan) -> Vec<f64> {
        (0..self.samples.len()).map(|p| assigned_cost(plan, &self.cache, p)).collect()
    }
}

/// Row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mesh: String,
    pub method: String,
    pub samples: usize,
    pub cameras: usize,
    pub total: f64,
    pub mean: f64,
    pub in_focus_area_mm2: f64,
    pub lower_bound: f64,
    pub iterations: usize,
}

pub const REPORT_HEADER: [&str; 9] = [
    "mesh",
    "method",
    "samples",
    "cameras",
    "total",
    "mean",
    "in_focus_area_mm2",
    "lower_bound",
    "iterations",
];

/// Row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub mesh: String,
    pub method: String,
    pub iteration: usize,
    pub phase: String,
    pub total: f64,
}

/// Row of `timing.csv`. Wall-clock times live here only, so the other
/// files are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub mesh: String,
    pub task: String,
    pub iteration: usize,
    pub phase: String,
    pub wall_ms: f64,
}

/// CSV writer flushed after every row, so a failed run keeps its rows.
struct Sink(csv::Writer<File>);

impl Sink {
    fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(Self(csv::Writer::from_writer(file)))
    }

    fn row<T: Serialize>(&mut self, row: &T) -> Result<(), HarnessError> {
        self.0.serialize(row)?;
        self.0.flush().map_err(|e| HarnessError::Io {
            path: "csv".into(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct MethodRecord {
    method: Method,
    report: CostReport,
    focus: Vec<Option<f64>>,
    wall_ms: f64,
    trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct SceneRecord {
    mesh: String,
    samples: usize,
    cameras: usize,
    blind_cameras: Vec<usize>,
    lower_bound: f64,
    visibility_sha256: String,
    methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, Serialize)]
struct ReportDocument<'a> {
    config: &'a ExperimentConfig,
    scenes: Vec<SceneRecord>,
}

/// What a finished run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub rows: Vec<ReportRow>,
    pub files: Vec<PathBuf>,
}

/// Runs the configured mode and writes its files to `config.output_dir`.
/// On failure a `FAILED` file holding the error is left next to whatever
/// rows were already written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let marker = dir.join("FAILED");
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| HarnessError::io(&marker, e))?;
    }
    let result = match config.mode {
        ExperimentMode::Single => run_single(config),
        ExperimentMode::SamplingDensity => run_sampling_density(config),
        ExperimentMode::GridSweep => run_grid_sweep(config),
        ExperimentMode::OverlapStudy => run_overlap_study(config),
        ExperimentMode::TupleSize => run_tuple_size(config),
    };
    if let Err(e) = &result {
        std::fs::write(&marker, format!("{e}\n")).map_err(|io| HarnessError::io(&marker, io))?;
    }
    result
}

fn scene_for(config: &ExperimentConfig, source: &MeshSource, samples: usize, seed: u64) -> Result<Scene, HarnessError> {
    let mesh = source.load()?;
    if mesh.dropped_degenerate() > 0 {
        log::info!("{}: dropped {} degenerate triangles", source.label(), mesh.dropped_degenerate());
    }
    Scene::build(
        source.label(),
        mesh,
        &config.rig_for(source),
        &config.intrinsics,
        &config.cost,
        samples,
        seed,
    )
}

/// Per-mesh artifact directory: the output directory itself for a single
/// mesh, numbered subdirectories otherwise.
fn artifact_dir(config: &ExperimentConfig, index: usize, label: &str) -> Result<PathBuf, HarnessError> {
    let dir = if config.meshes.len() == 1 {
        config.output_dir.clone()
    } else {
        config.output_dir.join(format!("{index:02}_{label}"))
    };
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

fn iterations(trace: &[TraceEntry]) -> usize {
    trace.last().map_or(0, |e| e.iteration)
}

fn run_single(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = &config.output_dir;
    let mut report = Sink::create(&dir.join("report.csv"))?;
    let mut trace_csv = Sink::create(&dir.join("trace.csv"))?;
    let mut timing = Sink::create(&dir.join("timing.csv"))?;
    let mut files = vec![dir.join("report.csv"), dir.join("trace.csv"), dir.join("timing.csv")];
    let mut rows = Vec::new();
    let mut scenes = Vec::new();

    for (index, source) in config.meshes.iter().enumerate() {
        let scene = scene_for(config, source, config.samples, config.seed)?;
        let out = artifact_dir(config, index, &scene.label)?;
        let meta = scene
            .visibility
            .export(&out.join("visibility.bin"), &out.join("visibility.json"), config.seed)?;
        files.extend([out.join("visibility.bin"), out.join("visibility.json")]);
        let bound = scene.lower_bound();
        let mut record = SceneRecord {
            mesh: scene.label.clone(),
            samples: scene.samples.len(),
            cameras: scene.cameras.len(),
            blind_cameras: scene.visibility.blind_cameras(),
            lower_bound: bound,
            visibility_sha256: meta.sha256,
            methods: Vec::new(),
        };
        for &method in &config.methods {
            let solution = scene.solve(method, &config.solver)?;
            let row = ReportRow {
                mesh: scene.label.clone(),
                method: method.to_string(),
                samples: solution.report.samples,
                cameras: solution.report.cameras,
                total: solution.report.total,
                mean: solution.report.mean,
                in_focus_area_mm2: solution.report.in_focus_area,
                lower_bound: bound,
                iterations: iterations(&solution.trace),
            };
            report.row(&row)?;
            rows.push(row);
            for e in &solution.trace {
                trace_csv.row(&TraceRow {
                    mesh: scene.label.clone(),
                    method: method.to_string(),
                    iteration: e.iteration,
                    phase: e.phase.name().into(),
                    total: e.total,
                })?;
                timing.row(&TimingRow {
                    mesh: scene.label.clone(),
                    task: method.to_string(),
                    iteration: e.iteration,
                    phase: e.phase.name().into(),
                    wall_ms: e.wall_ms,
                })?;
            }
            let cost_path = out.join(format!("cost_{method}.ply"));
            let cam_path = out.join(format!("cameras_{method}.ply"));
            export_cost_pointcloud(&scene.samples, &scene.sample_costs(&solution.plan), &cost_path)?;
            export_camera_pointcloud(&scene.cameras, &solution.plan.focus, &cam_path)?;
            files.extend([cost_path, cam_path]);
            log::info!("{} {method}: total {:.3}", scene.label, solution.report.total);
            record.methods.push(MethodRecord {
                method,
                report: solution.report,
                focus: solution.plan.focus,
                wall_ms: solution.wall_ms,
                trace: solution.trace,
            });
        }
        scenes.push(record);
    }
    let json_path = dir.join("report.json");
    let doc = ReportDocument { config, scenes };
    let file = File::create(&json_path).map_err(|e| HarnessError::io(&json_path, e))?;
    serde_json::to_writer_pretty(file, &doc)?;
    files.push(json_path);
    Ok(RunSummary {
        output_dir: dir.clone(),
        rows,
        files,
    })
}

/// Mean and sample standard deviation.
pub fn mean_and_sigma(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityRow {
    pub mesh: String,
    pub samples: usize,
    pub reseed: usize,
    pub seed: u64,
    pub total: f64,
    /// Mean cost scaled to 1000 samples.
    pub per_thousand: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensitySummaryRow {
    pub mesh: String,
    pub samples: usize,
    pub mean_per_thousand: f64,
    pub sigma_per_thousand: f64,
}

/// Cost spread over reseeded sample sets, per sample count.
pub fn sampling_density(
    scene: &Scene,
    config: &ExperimentConfig,
    mut on_row: impl FnMut(&DensityRow, &TimingRow) -> Result<(), HarnessError>,
) -> Result<Vec<DensitySummaryRow>, HarnessError> {
    let mut summary = Vec::new();
    for &e in &config.study.sample_exponents {
        let n = 1usize << e;
        let mut values = Vec::with_capacity(config.study.reseeds);
        for r in 0..config.study.reseeds {
            let seed = config.seed.wrapping_add(r as u64);
            let s = scene.resampled(n, seed)?;
            let solution = s.solve(Method::Kview, &config.solver)?;
            let per_thousand = solution.report.mean * 1000.0;
            values.push(per_thousand);
            let iters = iterations(&solution.trace).max(1);
            let kview_ms = solution.trace.last().map_or(0.0, |t| t.wall_ms);
            on_row(
                &DensityRow {
                    mesh: scene.label.clone(),
                    samples: n,
                    reseed: r,
                    seed,
                    total: solution.report.total,
                    per_thousand,
                },
                &TimingRow {
                    mesh: scene.label.clone(),
                    task: format!("kview_iteration_n{n}_r{r}"),
                    iteration: iters,
                    phase: "mean".into(),
                    wall_ms: kview_ms / iters as f64,
                },
            )?;
        }
        let (mean, sigma) = mean_and_sigma(&values);
        summary.push(DensitySummaryRow {
            mesh: scene.label.clone(),
            samples: n,
            mean_per_thousand: mean,
            sigma_per_thousand: sigma,
        });
    }
    Ok(summary)
}

fn run_sampling_density(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = &config.output_dir;
    let mut rows = Sink::create(&dir.join("study.csv"))?;
    let mut timing = Sink::create(&dir.join("timing.csv"))?;
    let mut summary = Sink::create(&dir.join("summary.csv"))?;
    for source in &config.meshes {
        let scene = scene_for(config, source, config.samples, config.seed)?;
        let result = sampling_density(&scene, config, |row, t| {
            rows.row(row)?;
            timing.row(t)
        })?;
        for r in &result {
            summary.row(r)?;
        }
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        rows: Vec::new(),
        files: ["study.csv", "timing.csv", "summary.csv"].iter().map(|f| dir.join(f)).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub mesh: String,
    pub budget: usize,
    pub angular: usize,
    pub vertical: usize,
    /// Row spacing over column arc length.
    pub aspect: f64,
    pub method: String,
    pub total: f64,
}

/// Grid shapes `(angular, vertical)` using exactly `budget` cameras.
pub fn grid_shapes(budget: usize, min_side: usize) -> Vec<(usize, usize)> {
    (1..=budget)
        .filter(|&z| budget.is_multiple_of(z))
        .map(|z| (budget / z, z))
        .filter(|&(a, z)| a >= min_side && z >= min_side)
        .collect()
}

fn run_grid_sweep(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = &config.output_dir;
    let mut rows = Sink::create(&dir.join("study.csv"))?;
    let mut timing = Sink::create(&dir.join("timing.csv"))?;
    for source in &config.meshes {
        let mesh = source.load()?;
        for &budget in &config.study.camera_budgets {
            for (a, z) in grid_shapes(budget, config.study.min_grid_side) {
                let spec = GridSpec {
                    angular: a,
                    vertical: z,
                    ..config.grid.clone()
                };
                let scene = Scene::build(
                    source.label(),
                    mesh.clone(),
                    &Rig::Grid(spec.clone()),
                    &config.intrinsics,
                    &config.cost,
                    config.samples,
                    config.seed,
                )?;
                let aspect = spec.spacing_aspect(spec.resolved_extent(&mesh));
                for &method in &config.methods {
                    let solution = scene.solve(method, &config.solver)?;
                    rows.row(&SweepRow {
                        mesh: scene.label.clone(),
                        budget,
                        angular: a,
                        vertical: z,
                        aspect,
                        method: method.to_string(),
                        total: solution.report.total,
                    })?;
                    timing.row(&TimingRow {
                        mesh: scene.label.clone(),
                        task: format!("{method}_{a}x{z}"),
                        iteration: iterations(&solution.trace),
                        phase: "total".into(),
                        wall_ms: solution.wall_ms,
                    })?;
                }
            }
        }
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        rows: Vec::new(),
        files: vec![dir.join("study.csv"), dir.join("timing.csv")],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapRow {
    pub mesh: String,
    pub camera_a: u32,
    pub camera_b: u32,
    /// Grid hops between the cameras; 0 when unreachable.
    pub hops: usize,
    pub overlap: f64,
    pub decrease: f64,
}

fn hop_distances(graph: &CameraGraph, from: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); graph.cameras];
    for &(a, b) in &graph.edges {
        adj[a as usize].push(b as usize);
        adj[b as usize].push(a as usize);
    }
    let mut dist = vec![0; graph.cameras];
    let mut seen = vec![false; graph.cameras];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// For every camera pair sharing a sample: overlap and the cost decrease a
/// single pair step achieves from the EM plan.
pub fn overlap_study(scene: &Scene, config: &SolverConfig) -> Result<Vec<OverlapRow>, HarnessError> {
    let (plan, _) = em_optimize(config, &scene.cache, initial_focus(config.init, &scene.cache))?;
    let n = scene.cameras.len();
    let mut rows = Vec::new();
    for a in 0..n {
        let hops = hop_distances(&scene.graph, a);
        for b in a + 1..n {
            let tuple = CameraTuple::new(vec![a as u32, b as u32]);
            let overlap = measure_overlap(&tuple, &scene.visibility);
            if overlap == 0.0 {
                continue;
            }
            let decrease = kview_step(&tuple, &plan, &scene.cache, config.prune)
                .map_or(0.0, |u| u.cost_before - u.cost_after);
            rows.push(OverlapRow {
                mesh: scene.label.clone(),
                camera_a: a as u32,
                camera_b: b as u32,
                hops: hops[b],
                overlap,
                decrease,
            });
        }
    }
    Ok(rows)
}

fn run_overlap_study(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = &config.output_dir;
    let mut rows = Sink::create(&dir.join("study.csv"))?;
    for source in &config.meshes {
        let scene = scene_for(config, source, config.samples, config.seed)?;
        for row in overlap_study(&scene, &config.solver)? {
            rows.row(&row)?;
        }
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        rows: Vec::new(),
        files: vec![dir.join("study.csv")],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TupleSizeRow {
    pub mesh: String,
    pub k: usize,
    pub total: f64,
    /// Cost relative to the pair result.
    pub relative_to_pairs: f64,
    pub iterations: usize,
}

/// Pairs against triples from the same EM plan; returns rows and the mean
/// milliseconds per pass for each.
pub fn tuple_size_study(scene: &Scene, config: &SolverConfig) -> Result<(Vec<TupleSizeRow>, Vec<f64>), HarnessError> {
    let (plan, _) = em_optimize(config, &scene.cache, initial_focus(config.init, &scene.cache))?;
    let mut results = Vec::new();
    for k in [2, 3] {
        let c = SolverConfig { k, ..config.clone() };
        let (p, trace) = kview_optimize(&c, &scene.cache, &scene.graph, plan.clone())?;
        let total = crate::assignment::total_cost(&p, &scene.cache)?.total;
        let iters = iterations(&trace).max(1);
        let ms = trace.last().map_or(0.0, |t| t.wall_ms) / iters as f64;
        results.push((k, total, iterations(&trace), ms));
    }
    let pairs = results[0].1;
    let rows = results
        .iter()
        .map(|&(k, total, iterations, _)| TupleSizeRow {
            mesh: scene.label.clone(),
            k,
            total,
            relative_to_pairs: if pairs > 0.0 { total / pairs } else { 1.0 },
            iterations,
        })
        .collect();
    Ok((rows, results.iter().map(|r| r.3).collect()))
}

fn run_tuple_size(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = &config.output_dir;
    let mut rows = Sink::create(&dir.join("study.csv"))?;
    let mut timing = Sink::create(&dir.join("timing.csv"))?;
    for source in &config.meshes {
        let scene = scene_for(config, source, config.samples, config.seed)?;
        let (result, ms) = tuple_size_study(&scene, &config.solver)?;
        for (row, ms) in result.iter().zip(ms) {
            rows.row(row)?;
            timing.row(&TimingRow {
                mesh: scene.label.clone(),
                task: format!("k{}", row.k),
                iteration: row.iterations,
                phase: "per_iteration".into(),
                wall_ms: ms,
            })?;
        }
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        rows: Vec::new(),
        files: vec![dir.join("study.csv"), dir.join("timing.csv")],
    })
}

/// Reads `report.csv` from `dir`, checks its header and renders a table
/// with each method's gain over the better single-view baseline.
pub fn report_summary(dir: &Path) -> Result<String, HarnessError> {
    let path = dir.join("report.csv");
    let mut reader = csv::Reader::from_path(&path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != REPORT_HEADER {
        return Err(HarnessError::Config(format!("{} has header {:?}", path.display(), header)));
    }
    let rows: Vec<ReportRow> = reader.deserialize().collect::<Result<_, _>>()?;
    let mut out = format!(
        "{:<16} {:<8} {:>7} {:>7} {:>12} {:>10} {:>12} {:>9}\n",
        "mesh", "method", "samples", "cameras", "total", "mean", "lower_bound", "vs_best"
    );
    for row in &rows {
        let baseline = rows
            .iter()
            .filter(|r| r.mesh == row.mesh && (r.method == "closest" || r.method == "avg"))
            .map(|r| r.total)
            .reduce(f64::min);
        let gain = baseline
            .filter(|b| *b > 0.0)
            .map_or("-".to_string(), |b| format!("{:+.1}%", 100.0 * (b - row.total) / b));
        out.push_str(&format!(
            "{:<16} {:<8} {:>7} {:>7} {:>12.3} {:>10.5} {:>12.3} {:>9}\n",
            row.mesh, row.method, row.samples, row.cameras, row.total, row.mean, row.lower_bound, gain
        ));
    }
    Ok(out)
}
