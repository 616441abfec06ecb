use std::path::Path;
use std::process::{Command, Output};

use fslab::manifest::{verify_manifest, StageStatus};
use serde_json::Value;

fn fslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fslab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const ROTATION: &str = r#"{"schema_version": 1, "backend": "SL2R",
    "measure": {"kind": "rotation-pair", "phi": 1.0}, "cutoff": 32, "seed": 4,
    "walk": {"steps": 4000, "trajectories": 4, "lyapunov_steps": 2000}}"#;

#[test]
fn decompose_reports_cartan_and_iwasawa() {
    let o = fslab(&["decompose", "--json", "[[1, 0], [0, 1]]"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cartan"]["t"], 0.0);
    assert_eq!(v["iwasawa"]["t"], 0.0);

    let o = fslab(&["decompose", "--json", "[[2, 0], [0, 0.5]]"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // The largest singular value of diag(2, 1/2) is 2.
    assert!((v["cartan"]["t"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);

    let o = fslab(&["decompose", "[[1, 0.5], [0.2, 1.1]]"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("reconstruction error"));
}

#[test]
fn decompose_rejects_bad_matrices_with_usage_code() {
    assert_eq!(fslab(&["decompose", "[[2, 0], [0, 1]]"]).status.code(), Some(2));
    assert_eq!(fslab(&["decompose", "[[1, 0], [0]]"]).status.code(), Some(2));
    assert_eq!(fslab(&["decompose", "not json"]).status.code(), Some(2));
}

#[test]
fn verify_passes_is_repeatable_and_detects_perturbation() {
    let a = fslab(&["verify"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&fslab(&["verify"])));
    let bad = fslab(&["verify", "--inject-perturbation"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL adjointness"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fslab(&["pipeline"]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.json", &ROTATION.replace("\"cutoff\": 32", "\"cutoff\": 2"));
    assert_eq!(fslab(&["pipeline", "--config", &bad]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "unknown.json", &ROTATION.replace("\"seed\"", "\"sede\""));
    assert_eq!(fslab(&["gap", "--config", &unknown]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "ok.json", ROTATION);
    assert_eq!(fslab(&["density", "--config", &cfg, "--cutoff", "100000"]).status.code(), Some(2));
}

#[test]
fn rotation_pipeline_gives_constant_density_and_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rot.json", ROTATION);
    let out = dir.path().join("out");
    let o = fslab(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest = verify_manifest(&out).unwrap();
    assert!(manifest.stages.iter().all(|s| s.status == StageStatus::Ok));
    let mut listed: Vec<_> = manifest.files.iter().map(|f| f.path.clone()).collect();
    let mut present: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);

    let decay = read_json(&out.join("decay.json"));
    assert!(decay["fit"].is_null());
    let norms: Vec<f64> = decay["block_norms"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((norms[0] - 1.0).abs() < 1e-12);
    assert!(norms[1..].iter().all(|&b| b < 1e-10), "{norms:?}");
    assert_eq!(decay["seed"], 4);
    assert_eq!(decay["basis_order_version"], 1);
    assert!(std::fs::read_to_string(out.join("walk.csv")).unwrap().starts_with("# seed=4 "));

    // Rerun: identical payloads.
    let again = dir.path().join("again");
    assert!(fslab(&["pipeline", "--config", &cfg, "--out", again.to_str().unwrap()]).status.success());
    for f in &manifest.files {
        assert_eq!(
            std::fs::read(out.join(&f.path)).unwrap(),
            std::fs::read(again.join(&f.path)).unwrap(),
            "{}",
            f.path
        );
    }
}

#[test]
fn failed_stage_is_recorded_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "strict.json",
        &ROTATION.replace("\"seed\": 4", "\"seed\": 4, \"self_check_tol\": 1e-300"),
    );
    let out = dir.path().join("out");
    let o = fslab(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let m = read_json(&out.join("manifest.json"));
    let stages = m["stages"].as_array().unwrap();
    let ops = stages.iter().find(|s| s["name"] == "operators").unwrap();
    assert_eq!(ops["status"], "failed");
    assert!(ops["message"].as_str().unwrap().contains("quadrature"));
    assert_eq!(stages.iter().find(|s| s["name"] == "density").unwrap()["status"], "skipped");
    assert_eq!(stages.iter().find(|s| s["name"] == "walk").unwrap()["status"], "ok");
}

#[test]
fn sweep_slopes_steepen_as_eps_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"schema_version": 1, "backend": "SL2R",
            "measure": {"kind": "conjugated-pair", "eps": 0.25, "conjugator": [[1.5, 0.5], [0, 0.6666666666666666]]},
            "cutoff": 128, "eps_sweep": [0.125, 0.5, 0.25]}"#,
    );
    let out = dir.path().join("lp");
    let o = fslab(&["lp", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = read_json(&out.join("sweep.json"));
    let entries = sweep["entries"].as_array().unwrap();
    let eps: Vec<f64> = entries.iter().map(|e| e["eps"].as_f64().unwrap()).collect();
    assert_eq!(eps, vec![0.5, 0.25, 0.125]);
    assert_eq!(sweep["abs_slope_increases_as_eps_decreases"], true);
}

#[test]
fn single_stage_commands_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rot.json", ROTATION);
    let o = fslab(&["gap", "--config", &cfg, "--threads", "2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_block"], 5);
    let o = fslab(&["walk", "--config", &cfg, "--seed", "9", "--out", dir.path().join("w").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("w/walk.json"))["seed"], 9);
}
