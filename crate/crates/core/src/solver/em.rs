use rayon::prelude::*;

use super::partition::optimal_focus_single;
use super::{converged, Phase, SolverConfig, SolverError, TraceEntry, Tracer};
use crate::assignment::{assign_step, total_cost, CostCache, FocusPlan};

/// Number of `members` sharp at focus `s`.
pub(crate) fn sharp_count(cache: &CostCache, c: usize, members: &[u32], s: Option<f64>) -> usize {
    match s {
        None => 0,
        Some(s) => members.iter().filter(|&&p| cache.in_focus(c, p as usize, s)).count(),
    }
}

/// Best focus for camera `c` over its members; the current focus is kept
/// only when it is strictly better than the sweep's pick (which can happen
/// when it sits exactly on a breakpoint). `None` keeps the current focus.
pub(crate) fn refocus(cache: &CostCache, c: usize, members: &[u32], current: Option<f64>) -> Option<f64> {
    let candidate = optimal_focus_single(cache, c, members)?;
    (sharp_count(cache, c, members, Some(candidate)) >= sharp_count(cache, c, members, current)).then_some(candidate)
}

/// Minimization half-step: every camera with members is refocused.
pub(crate) fn minimize_step(cache: &CostCache, plan: &mut FocusPlan) {
    let members = plan.members(cache.num_cameras());
    let updates: Vec<Option<f64>> = (0..cache.num_cameras())
        .into_par_iter()
        .map(|c| refocus(cache, c, &members[c], plan.focus[c]))
        .collect();
    for (c, s) in updates.into_iter().enumerate() {
        if s.is_some() {
            plan.focus[c] = s;
        }
    }
}

/// Alternates the minimization and assignment steps from `initial_focus`
/// until one iteration's relative decrease falls below the tolerance.
pub fn em_optimize(
    config: &SolverConfig,
    cache: &CostCache,
    initial_focus: Vec<Option<f64>>,
) -> Result<(FocusPlan, Vec<TraceEntry>), SolverError> {
    config.validate()?;
    let mut tracer = Tracer::new();
    let mut plan = FocusPlan::from_focus(initial_focus, cache);
    let mut previous = total_cost(&plan, cache)?.total;
    tracer.push(0, Phase::Init, previous);
    for iteration in 1..=config.max_iterations {
        minimize_step(cache, &mut plan);
        tracer.push(iteration, Phase::Minimize, total_cost(&plan, cache)?.total);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::test_scenes::random_scene;
    use crate::geometry::{SurfaceSample, VisibilityTable};
    use crate::optics::{CameraIntrinsics, CameraView, CostParams};
    use crate::solver::initial_focus;
    use nalgebra::{Point3, Vector3};

    fn facing_samples(depths: &[f64]) -> Vec<SurfaceSample> {
        depths
            .iter()
            .enumerate()
            .map(|(i, &d)| SurfaceSample {
                position: Point3::new(i as f64 * 0.5, 0.0, d),
                normal: Vector3::z(),
                weight: 1.0,
                source_triangle: 0,
            })
            .collect()
    }

    fn single_camera_cache(depths: &[f64]) -> CostCache {
        let cam = CameraView::new(0, Point3::origin(), Vector3::z(), Vector3::y(), CameraIntrinsics::default()).unwrap();
        let samples = facing_samples(depths);
        let vis = VisibilityTable::from_rows(vec![vec![true; samples.len()]]);
        CostCache::build(&samples, &[cam], &vis, &CostParams::default()).unwrap()
    }

    #[test]
    fn one_sample_converges_to_interval_midpoint() {
        let cache = single_camera_cache(&[750.0]);
        let (plan, trace) = em_optimize(&SolverConfig::default(), &cache, vec![Some(750.0)]).unwrap();
        assert!((plan.focus[0].unwrap() - 753.96).abs() < 0.01);
        assert_eq!(trace.last().unwrap().iteration, 1);
    }

    #[test]
    fn two_walls_focus_on_the_larger() {
        let mut depths = vec![600.0; 30];
        depths.extend(vec![1600.0; 50]);
        let cache = single_camera_cache(&depths);
        let (plan, _) = em_optimize(&SolverConfig::default(), &cache, vec![Some(700.0)]).unwrap();
        let s = plan.focus[0].unwrap();
        assert!(cache.in_focus(0, 40, s) && !cache.in_focus(0, 0, s), "focus {s}");

        let mut depths = vec![600.0; 50];
        depths.extend(vec![1600.0; 30]);
        let cache = single_camera_cache(&depths);
        let (plan, _) = em_optimize(&SolverConfig::default(), &cache, vec![Some(1500.0)]).unwrap();
        let s = plan.focus[0].unwrap();
        assert!(cache.in_focus(0, 0, s) && !cache.in_focus(0, 60, s), "focus {s}");
    }

    #[test]
    fn traces_never_increase() {
        for seed in 0..10 {
            let (s, c, v) = random_scene(seed, 6, 400);
            let cache = CostCache::build(&s, &c, &v, &CostParams::default()).unwrap();
            let config = SolverConfig::default();
            let (_, trace) = em_optimize(&config, &cache, initial_focus(config.init, &cache)).unwrap();
            assert!(trace.windows(2).all(|w| w[1].total <= w[0].total), "seed {seed}");
        }
    }

    #[test]
    fn stops_at_max_iterations() {
        let (s, c, v) = random_scene(3, 5, 300);
        let cache = CostCache::build(&s, &c, &v, &CostParams::default()).unwrap();
        let config = SolverConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let (_, trace) = em_optimize(&config, &cache, initial_focus(config.init, &cache)).unwrap();
        assert_eq!(trace.len(), 3);
    }
}
