//! End-to-end runs of the `mocap` binary on a small dataset.

use std::path::Path;
use std::process::{Command, Output};

use mocap_core::pipeline::commands::RunSummary;
use mocap_core::pipeline::config::RunConfig;
use serde_json::Value;

fn mocap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mocap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, views: usize) -> String {
    let mut cfg = RunConfig::default();
    cfg.template.surface_count = 2048;
    cfg.sensor.points = 1024;
    cfg.sequence.frames = 4;
    cfg.views = mocap_core::pipeline::config::ring_views(views);
    cfg.scene.frames = 5;
    let path = dir.join(format!("small_{views}.json"));
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn summary(path: &Path) -> RunSummary {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_chain_then_tamper_detection() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 2);
    let data = tmp.path().join("data");
    for command in ["simulate", "label", "fit", "solve", "fuse", "track", "eval", "verify"] {
        let out = mocap(&[command, "--config", &cfg], &data);
        assert!(out.status.success(), "{command}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(data.join("view_1/labels/frame_000003.csv").is_file());
    assert!(data.join("fused/view_0/frame_000000.json").is_file());
    assert!(data.join("fit/j2a.json").is_file());
    let mot: Value = serde_json::from_str(&std::fs::read_to_string(data.join("scene/mot.json")).unwrap()).unwrap();
    assert!(mot["mota"].as_f64().unwrap() > 0.9);

    std::fs::write(data.join("results/report.csv"), "tampered\n").unwrap();
    let out = mocap(&["verify"], &data);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("results/report.csv"));
}

#[test]
fn skip_refine_never_beats_refinement() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 1);
    let data = tmp.path().join("data");
    assert!(mocap(&["simulate", "--config", &cfg], &data).status.success());
    assert!(mocap(&["solve", "--oracle-labels"], &data).status.success());
    let refined = summary(&data.join("results/summary.json"));
    assert!(mocap(&["solve", "--oracle-labels", "--skip-refine"], &data).status.success());
    let initial = summary(&data.join("results/summary.json"));
    assert!(refined.refined && !initial.refined);
    assert!(initial.mean_final_cost >= refined.mean_final_cost);
    assert_eq!(initial.mean_final_cost, initial.mean_initial_cost);
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"sequence": {"frames": 4, "speed": 2}}"#).unwrap();
    let out = mocap(&["simulate", "--config", bad.to_str().unwrap()], &tmp.path().join("a"));
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("speed"));

    // fusing needs two views
    let cfg = small_config(tmp.path(), 1);
    let data = tmp.path().join("b");
    assert!(mocap(&["simulate", "--config", &cfg], &data).status.success());
    let out = mocap(&["fuse", "--oracle-labels"], &data);
    assert_eq!(out.status.code(), Some(2));

    // a different seed does not match the simulated dataset
    let out = mocap(&["solve", "--seed", "99", "--oracle-labels"], &data);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("hash"));

    // nothing to open
    let out = mocap(&["solve"], &tmp.path().join("missing"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn views_flag_places_a_sensor_ring() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 1);
    let data = tmp.path().join("data");
    let out = mocap(&["simulate", "--config", &cfg, "--views", "3"], &data);
    assert!(out.status.success());
    assert!(data.join("view_2/frame_000000.ply").is_file());
    let stored = RunConfig::load(&data.join("config.json")).unwrap();
    assert_eq!(stored.views.len(), 3);
}
