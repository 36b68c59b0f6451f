use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spinflow(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinflow"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("SPINFLOW_THREADS")
        .output()
        .unwrap()
}

fn setup(json: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, json).unwrap();
    let out = dir.path().join("out");
    (dir, config, out)
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn gaps_writes_report_and_table() {
    let (_d, config, out) = setup(r#"{"n":10,"xi":3,"j":1.0,"h":0.4}"#);
    let o = spinflow(&["gaps"], &config, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["scenario"], "propositions_ferro");
    let checks = r["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        for key in ["name", "measured", "expected", "tol", "status"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
        assert_eq!(c["status"], "pass");
    }
    let csv = std::fs::read_to_string(out.join("gaps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn zero_hopping_flow_is_the_identity() {
    let (_d, config, out) = setup(r#"{"n":7,"j":-1.0,"h":0.2,"t":0.0}"#);
    let o = spinflow(&["flow"], &config, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let id = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "identity flow").unwrap();
    assert_eq!(id["status"], "pass");
    assert!(out.join("steps.csv").exists());
}

#[test]
fn failed_assertion_exits_one() {
    // the ferromagnetic gap deviation grows like t squared, not linearly
    let (_d, config, out) = setup(r#"{"n":7,"j":1.0,"h":0.4,"t_grid":[1e-4,1e-3,1e-2]}"#);
    let o = spinflow(&["sweep"], &config, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("deviation exponent"));
    assert!(out.join("report.json").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let (_d, config, out) = setup(r#"{"n":8,"j":1.0,"h":0.4}"#);
    assert_eq!(spinflow(&["flow"], &config, &out).status.code(), Some(2));
    let (_d, config, out) = setup(r#"{"n":7,"j":1.0,"h":0.4,"colour":1}"#);
    assert_eq!(spinflow(&["flow"], &config, &out).status.code(), Some(2));
    let (_d, config, out) = setup(r#"{"n":7,"j":1.0,"h":0.4}"#);
    assert_eq!(spinflow(&["flow", "--tol.nonsense", "1"], &config, &out).status.code(), Some(2));
    assert_eq!(spinflow(&["wander"], &config, &out).status.code(), Some(2));
}

#[test]
fn resource_cap_exits_three() {
    let (_d, config, out) = setup(r#"{"n":7,"j":-1.0,"h":0.2,"t":0.01,"max_support_sites":4}"#);
    let o = spinflow(&["flow"], &config, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resource cap"));
}

#[test]
fn thread_cap_is_validated() {
    let (_d, config, out) = setup(r#"{"n":7,"j":1.0,"h":0.4}"#);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_spinflow"))
            .args(["gaps", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("SPINFLOW_THREADS", threads)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("zero"), Some(2));
}

#[test]
fn spectrum_matches_frozen_values() {
    let (_d, config, out) = setup(r#"{"n":7,"j":-1.0,"h":0.2,"t":0.02,"count":3}"#);
    let o = spinflow(&["spectrum"], &config, &out);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    let got: Vec<f64> = r["checks"].as_array().unwrap().iter().map(|c| c["measured"].as_f64().unwrap()).collect();
    let want = [-6.200799974999873, -5.800799974999859, -4.228754938383389];
    assert_eq!(got.len(), 3);
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-9, "{g} vs {w}");
    }
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_spinflow")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("--config"));
}
