use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dbsde(args: &[&str], env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dbsde"));
    cmd.args(args).env_remove("DBSDE_OUTPUT_DIR");
    if let Some(dir) = env {
        cmd.env("DBSDE_OUTPUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn small() -> Value {
    json!({
        "schema_version": 1,
        "name": "small",
        "market": { "horizon": 1.0, "rate": 0.01, "drift": [0.05], "volatility": [[0.2]], "spot": [100.0] },
        "intensity": { "lambda": 0.1 },
        "claim": { "V": { "put": 100.0 }, "C": 2.0 },
        "grid": { "steps": 10 },
        "paths": 2000,
        "seed": 3,
        "solver": { "basis": { "polynomial": 3 } }
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn error_record(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries a JSON error record")
}

#[test]
fn run_writes_summary_and_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", &small());
    let out_dir = dir.path().join("out");
    let out = dbsde(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["steps"], 10);
    assert!(summary["oracle"]["match"].as_bool().unwrap());
    let nodes = std::fs::read_to_string(out_dir.join("nodes.csv")).unwrap();
    assert_eq!(nodes.lines().count(), 11);
}

#[test]
fn malformed_grid_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small();
    v["grid"] = json!({ "nodes": [0.0, 0.6, 0.3, 1.0] });
    let cfg = write(dir.path(), "bad.json", &v);
    let out = dbsde(&["run", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let record = error_record(&out);
    assert_eq!(record["status"], "error");
    assert_eq!(record["exit_code"], 1);
    let errors = record["errors"].as_array().unwrap();
    assert!(
        errors
            .iter()
            .any(|e| e.as_str().unwrap().starts_with("TimeGrid")),
        "{errors:?}"
    );
    assert!(!dir.path().join("small").exists());
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", &small());
    let out = dbsde(&["validate", good.to_str().unwrap()], None);
    assert!(out.status.success());

    let mut v = small();
    v["paths"] = 10.into();
    v["solver"]["ridge"] = (-1.0).into();
    v["claim"]["underlying"] = 3.into();
    let bad = write(dir.path(), "bad.json", &v);
    let out = dbsde(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["errors"].as_array().unwrap().len(), 3);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", &small());
    let out = dbsde(&["run", cfg.to_str().unwrap()], Some(dir.path()));
    assert!(out.status.success());
    assert!(dir.path().join("small/summary.json").exists());
}

#[test]
fn unwritable_output_is_not_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", &small());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let target = blocker.join("out");
    let out = dbsde(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--out",
            target.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "io");
}

#[test]
fn convergence_needs_a_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small();
    v["market"] = json!({
        "horizon": 1.0,
        "rate": 0.01,
        "drift": [0.05, 0.05],
        "volatility": [[0.2, 0.0], [0.1, 0.3]],
        "spot": [100.0, 80.0]
    });
    let cfg = write(dir.path(), "basket.json", &v);
    let schedule = write(
        dir.path(),
        "schedule.json",
        &json!([{ "steps": 5, "paths": 1000 }, { "steps": 10, "paths": 1000 }]),
    );
    let out = dbsde(
        &[
            "converge",
            cfg.to_str().unwrap(),
            "--schedule",
            schedule.to_str().unwrap(),
        ],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(1));
    let errors = error_record(&out)["errors"].to_string();
    assert!(errors.contains("closed-form"), "{errors}");
}

#[test]
fn convergence_writes_one_row_per_schedule_entry() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small();
    v["claim"] = json!({ "V": { "call": 100.0 } });
    v["measure"] = json!({ "psi": 0.0 });
    let cfg = write(dir.path(), "call.json", &v);
    let schedule = write(
        dir.path(),
        "schedule.json",
        &json!([{ "steps": 4, "paths": 1000 }, { "steps": 6, "paths": 2000 }]),
    );
    let out_dir = dir.path().join("conv");
    let out = dbsde(
        &[
            "converge",
            cfg.to_str().unwrap(),
            "--schedule",
            schedule.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("convergence.json")).unwrap())
            .unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[1]["steps"], 6);
    assert!(rows.iter().all(|r| r["oracle"].as_f64().unwrap() > 0.0));
}
