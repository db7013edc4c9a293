//! Focus optimizers: the exact single-camera sweep, EM alternation, the
//! k-view joint step over camera tuples, tuple scheduling and the
//! single-view baselines.

mod baseline;
mod em;
mod kview;
mod partition;
mod schedule;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assignment::{total_cost, AssignmentError, CostCache, CostReport, FocusPlan};

pub use baseline::{baseline_avg, baseline_closest, baseline_midrange, initial_focus, visible_depths, InitPolicy};
pub use em::em_optimize;
pub use kview::{kview_optimize, kview_step, measure_overlap, TupleUpdate};
pub use partition::{build_partition, optimal_focus_single, BreakpointPartition};
pub use schedule::{independent_tuple_schedule, CameraGraph, CameraTuple};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("tuple size {0} is not supported (1 to 3)")]
    UnsupportedTupleSize(usize),
    #[error("adjacency graph has {graph} cameras, scene has {scene}")]
    GraphMismatch { graph: usize, scene: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closest,
    Avg,
    Em,
    Kview,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Closest, Method::Avg, Method::Em, Method::Kview];

    pub fn name(self) -> &'static str {
        match self {
            Method::Closest => "closest",
            Method::Avg => "avg",
            Method::Em => "em",
            Method::Kview => "kview",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Cameras per tuple in the k-view step.
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once the relative decrease of one iteration drops below this.
    pub tolerance: f64,
    pub init: InitPolicy,
    /// Tuples join cameras within this many grid hops.
    pub ring: usize,
    /// Skip tuple cells that provably cannot beat the incumbent.
    pub prune: bool,
    /// Re-assign all samples after every batch rather than once per pass.
    pub reassign_between_batches: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iterations: 50,
            tolerance: 1e-6,
            init: InitPolicy::Avg,
            ring: 1,
            prune: true,
            reassign_between_batches: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(1..=3).contains(&self.k) {
            return Err(SolverError::UnsupportedTupleSize(self.k));
        }
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.ring == 0 {
            return Err(SolverError::InvalidConfig("ring radius must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Minimize,
    Tuples,
    Assign,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Minimize => "minimize",
            Phase::Tuples => "tuples",
            Phase::Assign => "assign",
        }
    }
}

/// Total cost after one half-step of an optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub total: f64,
    /// Milliseconds since the optimizer started.
    pub wall_ms: f64,
}

/// Records trace entries against a common start time.
pub(crate) struct Tracer {
    start: Instant,
    pub entries: Vec<TraceEntry>,
}

impl Tracer {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, iteration: usize, phase: Phase, total: f64) {
        self.entries.push(TraceEntry {
            iteration,
            phase,
            total,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }
}

/// Relative decrease below tolerance, or nothing left to decrease.
pub(crate) fn converged(previous: f64, current: f64, tolerance: f64) -> bool {
    previous <= 0.0 || (previous - current) / previous < tolerance
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub method: Method,
    pub plan: FocusPlan,
    pub report: CostReport,
    pub trace: Vec<TraceEntry>,
    pub wall_ms: f64,
}

/// Runs one method end to end. Baselines assign greedily to their initial
/// foci; EM starts from `config.init`; k-view refines the EM result.
pub fn solve(method: Method, config: &SolverConfig, cache: &CostCache, graph: &CameraGraph) -> Result<Solution, SolverError> {
    config.validate()?;
    let start = Instant::now();
    let (plan, trace) = match method {
        Method::Closest | Method::Avg => {
            let policy = if method == Method::Closest {
                InitPolicy::Closest
            } else {
                InitPolicy::Avg
            };
            let plan = FocusPlan::from_focus(initial_focus(policy, cache), cache);
            let mut tracer = Tracer::new();
            tracer.push(0, Phase::Init, total_cost(&plan, cache)?.total);
            (plan, tracer.entries)
        }
        Method::Em => em_optimize(config, cache, initial_focus(config.init, cache))?,
        Method::Kview => {
            let (em_plan, _) = em_optimize(config, cache, initial_focus(config.init, cache))?;
            kview_optimize(config, cache, graph, em_plan)?
        }
    };
    let report = total_cost(&plan, cache)?;
    Ok(Solution {
        method,
        plan,
        report,
        trace,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
