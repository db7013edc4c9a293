use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::em::refocus;
use super::partition::{cell_probe, IntervalEvents};
use super::schedule::{independent_tuple_schedule, CameraGraph, CameraTuple};
use super::{converged, Phase, SolverConfig, SolverError, TraceEntry, Tracer};
use crate::assignment::{assign_step, total_cost, CostCache, FocusPlan};
use crate::geometry::VisibilityTable;

/// Proposed change for one tuple: new foci for its cameras and a new
/// camera for each of its working samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleUpdate {
    pub cameras: Vec<u32>,
    pub focus: Vec<Option<f64>>,
    /// Samples assigned to the tuple before the step, ascending.
    pub samples: Vec<u32>,
    pub assignment: Vec<u32>,
    pub cost_before: f64,
    pub cost_after: f64,
}

impl TupleUpdate {
    pub fn apply(&self, plan: &mut FocusPlan) {
        for (&c, &s) in self.cameras.iter().zip(&self.focus) {
            plan.focus[c as usize] = s;
        }
        for (&p, &c) in self.samples.iter().zip(&self.assignment) {
            plan.assignment[p as usize] = Some(c);
        }
    }
}

/// Fraction of the samples seen by any tuple camera that all of them see.
pub fn measure_overlap(tuple: &CameraTuple, visibility: &VisibilityTable) -> f64 {
    let mut any = 0usize;
    let mut all = 0usize;
    for p in 0..visibility.samples() {
        let seen = tuple.cameras.iter().filter(|&&c| visibility.get(c as usize, p)).count();
        if seen > 0 {
            any += 1;
        }
        if seen == tuple.cameras.len() && seen > 0 {
            all += 1;
        }
    }
    if any == 0 {
        0.0
    } else {
        all as f64 / any as f64
    }
}

/// Samples currently assigned to a camera of `tuple`, ascending.
fn working_set(tuple: &CameraTuple, plan: &FocusPlan) -> Vec<u32> {
    plan.assignment
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_some_and(|c| tuple.cameras.binary_search(&c).is_ok()))
        .map(|(p, _)| p as u32)
        .collect()
}

/// Joint refocus and re-assignment of the samples held by `tuple`.
///
/// Every cell of the product of the cameras' partitions is scored with each
/// sample going to its cheapest tuple camera. The first cell (in
/// lexicographic order of cell indices) of minimal cost is kept if it beats
/// the current plan. For a single camera this is the EM minimization step.
/// Returns `None` when nothing changes.
pub fn kview_step(tuple: &CameraTuple, plan: &FocusPlan, cache: &CostCache, prune: bool) -> Option<TupleUpdate> {
    kview_step_on(tuple, plan, cache, working_set(tuple, plan), prune)
}

fn kview_step_on(tuple: &CameraTuple, plan: &FocusPlan, cache: &CostCache, samples: Vec<u32>, prune: bool) -> Option<TupleUpdate> {
    if samples.is_empty() || tuple.is_empty() {
        return None;
    }
    let cost_before: f64 = samples
        .iter()
        .map(|&p| {
            let c = plan.assignment[p as usize].expect("working samples are assigned") as usize;
            cache.cost(c, p as usize, plan.focus[c])
        })
        .sum();

    let focus: Vec<Option<f64>> = if tuple.len() == 1 {
        let c = tuple.cameras[0] as usize;
        vec![Some(refocus(cache, c, &samples, plan.focus[c])?)]
    } else {
        let problem = TupleProblem::new(tuple, plan, cache, &samples, prune);
        let cells = problem.search(cost_before)?;
        problem.foci(&cells)
    };

    let mut cost_after = 0.0;
    let assignment: Vec<u32> = samples
        .iter()
        .map(|&p| {
            let mut best = (u32::MAX, f64::INFINITY);
            for (&c, &s) in tuple.cameras.iter().zip(&focus) {
                if !cache.visible(c as usize, p as usize) {
                    continue;
                }
                let cost = cache.cost(c as usize, p as usize, s);
                if cost < best.1 {
                    best = (c, cost);
                }
            }
            cost_after += best.1;
            best.0
        })
        .collect();
    debug_assert!(cost_after <= cost_before);
    Some(TupleUpdate {
        cameras: tuple.cameras.clone(),
        focus,
        samples,
        assignment,
        cost_before,
        cost_after,
    })
}

/// Product-partition search for one tuple of two or more cameras. Outer
/// cameras are enumerated cell by cell; the last camera is swept with
/// incremental cost updates, so a pair costs O(n²) for n working samples.
struct TupleProblem {
    samples: usize,
    w_focus: f64,
    current: Vec<Option<f64>>,
    /// Focus-independent cost per camera and working sample; infinite when hidden.
    base: Vec<Vec<f64>>,
    events: Vec<IntervalEvents>,
    probes: Vec<Vec<Option<f64>>>,
    /// `floor[j][i]`: smallest base over cameras `j..`.
    floor: Vec<Vec<f64>>,
    prune: bool,
}

struct Search {
    best: f64,
    cells: Vec<usize>,
    best_cells: Option<Vec<usize>>,
}

impl TupleProblem {
    fn new(tuple: &CameraTuple, plan: &FocusPlan, cache: &CostCache, samples: &[u32], prune: bool) -> Self {
        let n = samples.len();
        let mut base = Vec::with_capacity(tuple.len());
        let mut events = Vec::with_capacity(tuple.len());
        let mut probes = Vec::with_capacity(tuple.len());
        let mut current = Vec::with_capacity(tuple.len());
        for &c in &tuple.cameras {
            let c = c as usize;
            let intr = &cache.camera(c).intrinsics;
            base.push(
                samples
                    .iter()
                    .map(|&p| cache.base(c, p as usize).unwrap_or(f64::INFINITY))
                    .collect::<Vec<_>>(),
            );
            let intervals: Vec<_> = samples.iter().map(|&p| cache.interval(c, p as usize)).collect();
            let ev = IntervalEvents::new(&intervals, intr.focal_length);
            probes.push(
                (0..ev.num_cells())
                    .map(|i| cell_probe(&ev.breakpoints, i, intr.focal_length, intr.unbounded_focus()))
                    .collect(),
            );
            events.push(ev);
            current.push(plan.focus[c]);
        }
        let k = tuple.len();
        let mut floor = vec![vec![f64::INFINITY; n]; k + 1];
        for j in (0..k).rev() {
            for i in 0..n {
                floor[j][i] = floor[j + 1][i].min(base[j][i]);
            }
        }
        Self {
            samples: n,
            w_focus: cache.w_focus(),
            current,
            base,
            events,
            probes,
            floor,
            prune,
        }
    }

    /// Cell indices of the first minimal cell, if it is strictly below `incumbent`.
    fn search(&self, incumbent: f64) -> Option<Vec<usize>> {
        let mut search = Search {
            best: incumbent,
            cells: vec![0; self.base.len()],
            best_cells: None,
        };
        let outer = vec![f64::INFINITY; self.samples];
        if self.base.len() == 1 {
            let mut gain = vec![0.0; self.samples];
            let (sum, _) = self.leaf_inputs(outer.iter().copied(), &mut gain);
            self.sweep_last(&gain, sum, &mut search);
        } else {
            self.descend(0, &outer, &mut search);
        }
        search.best_cells
    }

    /// For the innermost camera: the gain of each sample turning sharp, the
    /// sum in its first cell, and the sum if every sample were sharp (a
    /// lower bound over all its cells). The best cost so far per sample is
    /// `best`. Branch-free: sharp flags are random.
    fn leaf_inputs(&self, best: impl Iterator<Item = f64>, gain: &mut [f64]) -> (f64, f64) {
        let last = self.base.len() - 1;
        let (mut first, mut bound) = (0.0, 0.0);
        let rows = best.zip(&self.base[last]).zip(&self.events[last].initially_sharp);
        for (g, ((o, &leaf), &sharp)) in gain.iter_mut().zip(rows) {
            let lo = o.min(leaf);
            let hi = o.min(leaf + self.w_focus);
            *g = hi - lo;
            bound += lo;
            first += hi - *g * f64::from(sharp as u8);
        }
        (first, bound)
    }

    fn sweep_last(&self, gain: &[f64], mut sum: f64, search: &mut Search) {
        let level = self.base.len() - 1;
        let events = &self.events[level];
        for cell in 0..events.num_cells() {
            if cell > 0 {
                for &(i, enter) in events.crossing(cell - 1) {
                    sum += gain[i as usize] * (1.0 - 2.0 * f64::from(enter as u8));
                }
            }
            if sum < search.best && self.probes[level][cell].is_some() {
                search.best = sum;
                search.cells[level] = cell;
                search.best_cells = Some(search.cells.clone());
            }
        }
    }

    fn descend(&self, level: usize, outer: &[f64], search: &mut Search) {
        let events = &self.events[level];
        let mut sharp = events.initially_sharp.clone();
        let w = self.w_focus;
        let leaf_next = level + 2 == self.base.len();
        let mut next = vec![0.0; if leaf_next { 0 } else { self.samples }];
        let mut gain = vec![0.0; if leaf_next { self.samples } else { 0 }];
        for cell in 0..events.num_cells() {
            if cell > 0 {
                for &(i, enter) in events.crossing(cell - 1) {
                    sharp[i as usize] = enter;
                }
            }
            if self.probes[level][cell].is_none() {
                continue;
            }
            search.cells[level] = cell;
            if leaf_next {
                let own = self.base[level].iter().zip(&sharp).map(|(&b, &s)| b + w * f64::from(!s as u8));
                // nothing is assigned above the top level
                let (first, bound) = if level == 0 {
                    self.leaf_inputs(own, &mut gain)
                } else {
                    self.leaf_inputs(own.zip(outer).map(|(c, &o)| c.min(o)), &mut gain)
                };
                if !self.prune || bound < search.best {
                    self.sweep_last(&gain, first, search);
                }
                continue;
            }
            for (((v, &o), &b), &s) in next.iter_mut().zip(outer).zip(&self.base[level]).zip(&sharp) {
                *v = o.min(b + w * f64::from(!s as u8));
            }
            if self.prune {
                let floor = &self.floor[level + 1];
                let bound: f64 = next.iter().zip(floor).map(|(a, b)| a.min(*b)).sum();
                if bound >= search.best {
                    continue;
                }
            }
            self.descend(level + 1, &next, search);
        }
    }

    /// Probes of the chosen cells; cameras seeing none of the working
    /// samples keep their focus.
    fn foci(&self, cells: &[usize]) -> Vec<Option<f64>> {
        cells
            .iter()
            .enumerate()
            .map(|(j, &cell)| {
                if self.events[j].breakpoints.is_empty() {
                    self.current[j]
                } else {
                    self.probes[j][cell]
                }
            })
            .collect()
    }
}

/// Repeated passes over the tuple schedule, batch by batch, each followed
/// by a global assignment step. Tuples within a batch share no camera and
/// are solved in parallel.
pub fn kview_optimize(
    config: &SolverConfig,
    cache: &CostCache,
    graph: &CameraGraph,
    initial: FocusPlan,
) -> Result<(FocusPlan, Vec<TraceEntry>), SolverError> {
    config.validate()?;
    if graph.cameras != cache.num_cameras() {
        return Err(SolverError::GraphMismatch {
            graph: graph.cameras,
            scene: cache.num_cameras(),
        });
    }
    let batches = independent_tuple_schedule(graph, config.k, config.ring)?;
    let pass_phase = if config.k == 1 { Phase::Minimize } else { Phase::Tuples };

    let mut tracer = Tracer::new();
    let mut plan = initial;
    let mut previous = total_cost(&plan, cache)?.total;
    tracer.push(0, Phase::Init, previous);
    for iteration in 1..=config.max_iterations {
        for batch in &batches {
            let members = plan.members(cache.num_cameras());
            let updates: Vec<TupleUpdate> = batch
                .par_iter()
                .filter_map(|tuple| {
                    let mut samples: Vec<u32> = tuple
                        .cameras
                        .iter()
                        .flat_map(|&c| members[c as usize].iter().copied())
                        .collect();
                    samples.sort_unstable();
                    kview_step_on(tuple, &plan, cache, samples, config.prune)
                })
                .collect();
            for update in &updates {
                update.apply(&mut plan);
            }
            if config.reassign_between_batches {
                plan.assignment = assign_step(&plan.focus, cache);
            }
        }
        tracer.push(iteration, pass_phase, total_cost(&plan, cache)?.total);
        plan.assignment = assign_step(&plan.focus, cache);
        let current = total_cost(&plan, cache)?.total;
        tracer.push(iteration, Phase::Assign, current);
        if converged(previous, current, config.tolerance) {
            break;
        }
        previous = current;
    }
    Ok((plan, tracer.entries))
}
