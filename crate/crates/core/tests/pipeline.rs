use std::f64::consts::FRAC_PI_2;

use focusplan::geometry::VisibilityTable;
use focusplan::harness::{
    export_cost_pointcloud, read_cost_pointcloud, run_experiment, synthetic, ExperimentConfig, ExperimentMode, GridSpec,
    MeshSource, Rig, Scene, SyntheticMesh,
};
use focusplan::optics::{CameraIntrinsics, CostParams};
use focusplan::solver::{Method, SolverConfig};
use nalgebra::Point3;

fn body_scene(mesh: focusplan::geometry::TriangleMesh, angular: usize) -> Scene {
    let spec = GridSpec {
        angular,
        vertical: 3,
        radius: 750.0,
        extent: None,
    };
    Scene::build("body", mesh, &Rig::Grid(spec), &CameraIntrinsics::default(), &CostParams::default(), 512, 5).unwrap()
}

#[test]
fn quarter_turn_permutes_cameras() {
    let mesh = synthetic::capsule_body().unwrap();
    let (lo, hi) = mesh.bounding_box();
    let pivot = Point3::from((lo.coords + hi.coords) / 2.0);
    let a = 8;
    let original = body_scene(mesh.clone(), a);
    let turned = body_scene(mesh.rotated_about_z(FRAC_PI_2, pivot), a);

    // camera i of the original sees what camera i + a/4 sees after the turn
    let (mut agree, mut total) = (0, 0);
    for c in 0..original.cameras.len() {
        let (j, i) = (c / a, c % a);
        let d = j * a + (i + a / 4) % a;
        for p in 0..original.samples.len() {
            agree += (original.visibility.get(c, p) == turned.visibility.get(d, p)) as usize;
            total += 1;
        }
    }
    assert!(agree as f64 >= 0.999 * total as f64, "{agree} of {total}");

    let config = SolverConfig::default();
    for method in [Method::Avg, Method::Em] {
        let x = original.solve(method, &config).unwrap().report.total;
        let y = turned.solve(method, &config).unwrap().report.total;
        assert!((x - y).abs() <= 0.01 * x, "{method}: {x} vs {y}");
    }
}

#[test]
fn visibility_round_trips_through_files() {
    let scene = body_scene(synthetic::capsule_body().unwrap(), 6);
    let dir = tempfile::tempdir().unwrap();
    let (bin, json) = (dir.path().join("v.bin"), dir.path().join("v.json"));
    let meta = scene.visibility.export(&bin, &json, 5).unwrap();
    let (table, back) = VisibilityTable::import(&bin, &json).unwrap();
    assert_eq!(meta, back);
    assert_eq!(table, scene.visibility);

    // a flipped bit fails the digest check
    let mut bytes = std::fs::read(&bin).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&bin, bytes).unwrap();
    assert!(VisibilityTable::import(&bin, &json).is_err());
}

#[test]
fn cost_pointcloud_round_trips() {
    let scene = body_scene(synthetic::capsule_body().unwrap(), 6);
    let solution = scene.solve(Method::Em, &SolverConfig::default()).unwrap();
    let costs = scene.sample_costs(&solution.plan);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cost.ply");
    export_cost_pointcloud(&scene.samples, &costs, &path).unwrap();
    let (points, back) = read_cost_pointcloud(&path).unwrap();
    assert_eq!(back, costs);
    assert!(points.iter().zip(&scene.samples).all(|(a, b)| *a == b.position));
    assert!((back.iter().sum::<f64>() - solution.report.total).abs() < 1e-9);
}

#[test]
fn single_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        meshes: vec![MeshSource::Synthetic {
            synthetic: SyntheticMesh::SwapWalls,
        }],
        samples: 200,
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let summary = run_experiment(&config).unwrap();
    assert_eq!(summary.rows.len(), Method::ALL.len());
    for name in [
        "report.csv",
        "report.json",
        "trace.csv",
        "timing.csv",
        "visibility.bin",
        "visibility.json",
        "cost_em.ply",
        "cameras_kview.ply",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let em = summary.rows.iter().find(|r| r.method == "em").unwrap();
    let kview = summary.rows.iter().find(|r| r.method == "kview").unwrap();
    assert!(kview.total < em.total);
    assert!(kview.lower_bound <= kview.total);
}

#[test]
fn failed_run_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.obj");
    std::fs::write(&broken, "v 0 0 0\nf 1 2 3\n").unwrap();
    let config = ExperimentConfig {
        meshes: vec![MeshSource::File {
            path: broken,
            format: None,
        }],
        output_dir: dir.path().join("out"),
        ..Default::default()
    };
    assert!(run_experiment(&config).is_err());
    assert!(dir.path().join("out/FAILED").is_file());
}

#[test]
fn tuple_size_study_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        samples: 256,
        mode: ExperimentMode::TupleSize,
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    run_experiment(&config).unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().count() > 0);
}
