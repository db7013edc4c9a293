use focusplan::assignment::{assign_step, lower_bound, quantize, total_cost, FocusPlan};
use focusplan::harness::{synthetic, GridSpec, Rig, Scene};
use focusplan::optics::{dof_limits, focus_interval_for_depth, CameraIntrinsics, CostParams, FarLimit};
use focusplan::solver::{
    em_optimize, independent_tuple_schedule, initial_focus, kview_optimize, kview_step, CameraTuple, SolverConfig,
};
use nalgebra::Point3;
use proptest::prelude::*;

fn scene(radius: f64, angular: usize, vertical: usize, samples: usize, seed: u64) -> Scene {
    let mesh = synthetic::capsule(Point3::new(0.0, 0.0, 600.0), radius, 1200.0, 24, 4).unwrap();
    let spec = GridSpec {
        angular,
        vertical,
        radius: 700.0,
        extent: None,
    };
    Scene::build("capsule", mesh, &Rig::Grid(spec), &CameraIntrinsics::default(), &CostParams::default(), samples, seed)
        .unwrap()
}

fn scene_strategy() -> impl Strategy<Value = Scene> {
    (100.0..350.0f64, 3usize..9, 1usize..4, 64usize..256, any::<u64>()).prop_map(|(r, a, z, n, s)| scene(r, a, z, n, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn focus_lies_inside_its_limits(s in 50.001f64..1e6) {
        let l = dof_limits(s, &CameraIntrinsics::default()).unwrap();
        prop_assert!(l.near < s);
        prop_assert!(l.far.admits(s));
        prop_assert!(l.contains(s));
    }

    #[test]
    fn depth_is_sharp_exactly_on_its_interval(d in 60.0f64..20_000.0, t in 0.0f64..1.0) {
        let k = CameraIntrinsics::default();
        let iv = focus_interval_for_depth(d, &k).unwrap();
        let hi = iv.hi.finite().unwrap_or(iv.lo * 4.0);
        let s = iv.lo + t * (hi - iv.lo);
        if s > iv.lo && s < hi {
            prop_assert!(dof_limits(s, &k).unwrap().contains(d));
        }
        prop_assert_eq!(matches!(iv.hi, FarLimit::Infinite), d >= k.hyperfocal);
    }

    #[test]
    fn quantized_sums_ignore_order(xs in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let q: Vec<f64> = xs.iter().map(|&x| quantize(x)).collect();
        let forward: f64 = q.iter().sum();
        let backward: f64 = q.iter().rev().sum();
        prop_assert_eq!(forward, backward);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn assignment_is_pointwise_optimal(scene in scene_strategy(), offset in -200.0f64..200.0) {
        let focus: Vec<Option<f64>> = initial_focus(Default::default(), &scene.cache)
            .into_iter()
            .map(|s| s.map(|s| (s + offset).max(60.0)))
            .collect();
        let assignment = assign_step(&focus, &scene.cache);
        for (p, a) in assignment.iter().enumerate() {
            let best = scene.cache.seeing_cameras(p).iter()
                .filter(|&&c| focus[c as usize].is_some())
                .map(|&c| scene.cache.cost(c as usize, p, focus[c as usize]))
                .fold(f64::INFINITY, f64::min);
            match a {
                Some(c) => prop_assert_eq!(scene.cache.cost(*c as usize, p, focus[*c as usize]), best),
                None => prop_assert!(best.is_infinite()),
            }
        }
        let plan = FocusPlan { focus, assignment };
        prop_assert!(lower_bound(&scene.cache) <= total_cost(&plan, &scene.cache).unwrap().total);
    }

    #[test]
    fn optimizers_never_increase_cost(scene in scene_strategy()) {
        let config = SolverConfig::default();
        let (em, em_trace) = em_optimize(&config, &scene.cache, initial_focus(config.init, &scene.cache)).unwrap();
        prop_assert!(em_trace.windows(2).all(|w| w[1].total <= w[0].total));
        let em_total = total_cost(&em, &scene.cache).unwrap().total;
        let (kv, kv_trace) = kview_optimize(&config, &scene.cache, &scene.graph, em).unwrap();
        prop_assert!(kv_trace.windows(2).all(|w| w[1].total <= w[0].total));
        let kv_total = total_cost(&kv, &scene.cache).unwrap().total;
        prop_assert!(kv_total <= em_total);
        prop_assert!(scene.lower_bound() <= kv_total);
        prop_assert!(kv_total <= scene.samples.len() as f64);
    }

    #[test]
    fn tuple_step_only_improves(scene in scene_strategy(), pick in any::<prop::sample::Index>()) {
        let config = SolverConfig::default();
        let plan = FocusPlan::from_focus(initial_focus(config.init, &scene.cache), &scene.cache);
        let edge = scene.graph.edges[pick.index(scene.graph.edges.len())];
        let tuple = CameraTuple::new(vec![edge.0, edge.1]);
        if let Some(update) = kview_step(&tuple, &plan, &scene.cache, true) {
            prop_assert!(update.cost_after < update.cost_before);
            let before = total_cost(&plan, &scene.cache).unwrap().total;
            let mut after = plan.clone();
            update.apply(&mut after);
            let after = total_cost(&after, &scene.cache).unwrap().total;
            prop_assert!((before - after - (update.cost_before - update.cost_after)).abs() < 1e-9);
        }
    }

    #[test]
    fn schedule_batches_are_disjoint_and_cover_edges(a in 2usize..30, z in 1usize..6, k in 1usize..4) {
        let mesh = synthetic::uv_sphere(Point3::origin(), 200.0, 12, 6).unwrap();
        let spec = GridSpec { angular: a, vertical: z, radius: 700.0, extent: None };
        let (_, graph) = focusplan::harness::generate_cylindrical_grid(&spec, &mesh, &CameraIntrinsics::default()).unwrap();
        let batches = independent_tuple_schedule(&graph, k, 1).unwrap();
        let mut seen = Vec::new();
        for batch in &batches {
            let mut used: Vec<u32> = batch.iter().flat_map(|t| t.cameras.clone()).collect();
            let n = used.len();
            used.sort();
            used.dedup();
            prop_assert_eq!(used.len(), n);
            for t in batch {
                prop_assert_eq!(t.len(), k);
                seen.push(t.cameras.clone());
            }
        }
        let total = seen.len();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), total);
        if k == 1 {
            prop_assert_eq!(total, a * z);
        }
        if k == 2 {
            prop_assert_eq!(total, graph.edges.len());
        }
    }
}
