use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn kerrsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kerrsim")).args(args).env_remove("KERRSIM_SEED").output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kerrsim-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_metadata(mut v: Value) -> String {
    v.as_object_mut().unwrap().remove("metadata");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn same_spec_same_report_regardless_of_jobs() {
    let base = ["parity", "--alpha", "40", "--theta", "0.3", "--trials", "3e3", "--seed", "7"];
    let a = json(&kerrsim(&[&base[..], &["--jobs", "1"]].concat()));
    let b = json(&kerrsim(&[&base[..], &["--jobs", "4"]].concat()));
    assert_eq!(a["schemaVersion"], 1);
    assert!(a["metadata"]["wallTimeS"].is_number());
    assert_eq!(without_metadata(a), without_metadata(b));
}

#[test]
fn spec_is_embedded() {
    let v = json(&kerrsim(&["detector", "--alpha", "10", "--theta", "0.3", "--trials", "1e3", "--seed", "3"]));
    assert_eq!(v["spec"]["command"], "detector");
    assert_eq!(v["spec"]["alpha"], 10.0);
    assert_eq!(v["spec"]["trials"], 1000);
    assert_eq!(v["spec"]["quadrature"], "p");
    assert_eq!(v["result"]["monteCarlo"]["trials"], 1000);
}

#[test]
fn seed_defaults_to_environment() {
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_kerrsim"));
        c.args(["detector", "--alpha", "6", "--trials", "500"]).env_remove("KERRSIM_SEED");
        if let Some(s) = seed {
            c.env("KERRSIM_SEED", s);
        }
        json(&c.output().unwrap())
    };
    assert_eq!(run(Some("1234"))["spec"]["seed"], 1234);
    assert_eq!(run(None)["spec"]["seed"], 1);
    let explicit = json(&kerrsim(&["detector", "--alpha", "6", "--trials", "500", "--seed", "1234"]));
    assert_eq!(without_metadata(run(Some("1234"))), without_metadata(explicit));
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("spec.json");
    std::fs::write(&cfg, r#"{"alpha": 30, "theta": 0.4, "trials": "2e3", "seed": 5, "noise-sigma": 0.01}"#).unwrap();
    let v = json(&kerrsim(&["bell", "--config", cfg.to_str().unwrap(), "--alpha", "35"]));
    assert_eq!(v["spec"]["alpha"], 35.0);
    assert_eq!(v["spec"]["theta"], 0.4);
    assert_eq!(v["spec"]["trials"], 2000);
    assert_eq!(v["spec"]["noiseSigma"], 0.01);
    assert_eq!(v["result"]["confusion"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_two_with_json() {
    for args in [
        vec!["parity", "--trials", "1.5"],
        vec!["parity", "--alpha", "-3"],
        vec!["validate", "--alpha", "50"],
        vec!["cnot", "--input", "HQ"],
        vec!["frobnicate"],
        vec!["bell", "--config", "/nonexistent/kerrsim.json"],
    ] {
        let out = kerrsim(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "usage");
        assert_eq!(err["exitCode"], 2);
    }
}

#[test]
fn validate_passes_at_reference_point() {
    let v = json(&kerrsim(&["validate", "--alpha", "2", "--theta", "0.5"]));
    assert_eq!(v["result"]["passed"], true);
    assert!(v["result"]["maxDensityLinf"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["result"]["cases"].as_array().unwrap().len(), 12);
}

#[test]
fn csv_output_with_sidecar_report() {
    let dir = scratch("csv");
    let out = dir.join("sweep.csv");
    let o = kerrsim(&["sweep", "--theta", "0.05:0.5:0.05", "--target-xd", "10", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,alpha,photon_number,xd,p_err_parity,extrapolated");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11);
    let last = rows.last().unwrap();
    assert_eq!(last[0], "0.01");
    assert_eq!(last[5], "true");
    let alpha: f64 = last[1].parse().unwrap();
    assert!((alpha - 1e5).abs() / 1e5 < 0.02);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["spec"]["targetXd"], 10.0);
}

#[test]
fn cnot_truth_table_within_bound() {
    let v = json(&kerrsim(&["cnot", "--alpha", "100", "--theta", "0.3", "--trials", "2e3", "--seed", "42"]));
    let rows = v["result"]["truthTable"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r["withinBound"], true);
    }
    assert!(v["result"]["entangling"]["meanFidelity"].as_f64().unwrap() >= 0.999);
}

#[test]
fn help_exits_cleanly() {
    let out = kerrsim(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("validate"));
}
