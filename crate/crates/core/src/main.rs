use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use focusplan::geometry::load_mesh;
use focusplan::harness::config::ExperimentConfig;
use focusplan::harness::experiment::report_summary;
use focusplan::harness::{generate_cylindrical_grid, run_experiment, synthetic, GridSpec};
use focusplan::optics::CameraIntrinsics;
use focusplan::solver::{InitPolicy, Method};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "focusplan", version, about = "Plan per-camera focus distances for a multi-camera rig")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Print the cylindrical camera grid as JSON.
    Grid(GridArgs),
    /// Summarize report.csv from an output directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run only this method.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ring: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitPolicy>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GridArgs {
    #[arg(long, default_value_t = 24)]
    a: usize,
    #[arg(long, default_value_t = 7)]
    z: usize,
    #[arg(long, default_value_t = 750.0)]
    r: f64,
    /// Mesh whose bounds set the axis and height; the bundled figure if absent.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, requires = "z_max")]
    z_min: Option<f64>,
    #[arg(long, requires = "z_min")]
    z_max: Option<f64>,
}

#[derive(Serialize)]
struct GridCamera {
    id: u32,
    position: [f64; 3],
    forward: [f64; 3],
    up: [f64; 3],
}

#[derive(Serialize)]
struct GridOutput {
    cameras: Vec<GridCamera>,
    edges: Vec<(u32, u32)>,
    extent: [f64; 2],
    aspect: f64,
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(m) = args.method {
        config.methods = vec![m];
    }
    let s = &mut config.solver;
    if let Some(k) = args.k {
        s.k = k;
    }
    if let Some(r) = args.ring {
        s.ring = r;
    }
    if let Some(n) = args.max_iters {
        s.max_iterations = n;
    }
    if let Some(t) = args.tol {
        s.tolerance = t;
    }
    if let Some(i) = args.init {
        s.init = i;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let summary = run_experiment(&config)?;
    for row in &summary.rows {
        println!("{} {}: total {:.4} (mean {:.5})", row.mesh, row.method, row.total, row.mean);
    }
    println!("wrote {} files to {}", summary.files.len(), summary.output_dir.display());
    Ok(())
}

fn grid(args: GridArgs) -> Result<()> {
    let mesh = match &args.mesh {
        Some(p) => load_mesh(p, None).with_context(|| format!("loading {}", p.display()))?,
        None => synthetic::capsule_body()?,
    };
    let spec = GridSpec {
        angular: args.a,
        vertical: args.z,
        radius: args.r,
        extent: args.z_min.zip(args.z_max).map(|(lo, hi)| [lo, hi]),
    };
    let (cameras, graph) = generate_cylindrical_grid(&spec, &mesh, &CameraIntrinsics::default())?;
    let extent = spec.resolved_extent(&mesh);
    let out = GridOutput {
        cameras: cameras
            .iter()
            .map(|c| GridCamera {
                id: c.id,
                position: c.position.coords.into(),
                forward: c.forward.into(),
                up: c.up.into(),
            })
            .collect(),
        edges: graph.edges,
        extent,
        aspect: spec.spacing_aspect(extent),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    eprintln!("{} cameras, {} edges", out.cameras.len(), out.edges.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Grid(args) => grid(args),
        Command::Report { dir } => {
            print!("{}", report_summary(&dir)?);
            Ok(())
        }
    }
}
