use std::path::Path;
use std::process::{Command, Output};

fn focusplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_focusplan")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn grid_prints_rig_as_json() {
    let out = focusplan(&["grid", "--a", "24", "--z", "7", "--r", "750"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["cameras"].as_array().unwrap().len(), 168);
    assert_eq!(json["edges"].as_array().unwrap().len(), 312);
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim(), "168 cameras, 312 edges");
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"samples": 300, "methods": ["avg", "em", "kview"]}"#);
    let out_dir = dir.path().join("out");
    let out = focusplan(&["run", "--config", &config, "--out", out_dir.to_str().unwrap(), "--max-iters", "5", "--k", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.starts_with("mesh,method,samples,cameras,total,"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["solver"]["k"], 3);

    let out = focusplan(&["report", "--dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("kview") && text.contains("em"), "{text}");
}

#[test]
fn method_flag_restricts_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"samples": 200}"#);
    let out_dir = dir.path().join("out");
    let out = focusplan(&[
        "run", "--config", &config, "--out", out_dir.to_str().unwrap(), "--method", "em", "--init", "closest", "--seed", "3",
        "--tol", "1e-4", "--ring", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(out_dir.join("cost_em.ply").is_file());
    assert!(!out_dir.join("cost_kview.ply").exists());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"samples": 200, "bogus": 1}"#);
    let out = focusplan(&["run", "--config", &config]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let config = write_config(dir.path(), r#"{"samples": 200}"#);
    let out = focusplan(&["run", "--config", &config, "--k", "4", "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());

    let out = focusplan(&["report", "--dir", dir.path().join("nowhere").to_str().unwrap()]);
    assert!(!out.status.success());
}
