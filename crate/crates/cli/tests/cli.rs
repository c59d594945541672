use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

/// Small defaults so each run finishes quickly in debug builds.
const SMALL: [&str; 3] = ["--set", "model.m=256", "--set=train.steps=50"];

fn sntk(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sntk"))
        .arg(cmd)
        .arg("--out")
        .arg(out)
        .args(SMALL)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_steps_writes_one_trace_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("train", dir.path(), &["--set", "train.steps=0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["steps"], 0);
    assert!(summary["lambda_hat"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("checkpoint.bin").exists());
    assert!(!dir.path().join(".lock").exists());
}

#[test]
fn unknown_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("train", dir.path(), &["--set", "train.etaa=0.1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("etaa"));
}

#[test]
fn unknown_key_in_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"model": {"m": 64}, "outptu": {}}"#).unwrap();
    let o = sntk("train", &dir.path().join("out"), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("outptu"));
}

#[test]
fn monte_carlo_without_samples_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("ntk", dir.path(), &["--set", "ntk.method=monte_carlo", "--set", "ntk.mc_samples=0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn orthonormal_limiting_kernel_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk(
        "ntk",
        dir.path(),
        &["--set", "dataset.generator=orthonormal", "--set", "dataset.params.d=6", "--set", "dataset.params.n=4"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("4"));
    for (i, line) in lines.enumerate() {
        for (j, v) in line.split(',').enumerate() {
            let expected = if i == j { 1.0 } else { 0.25 };
            assert!((v.parse::<f64>().unwrap() - expected).abs() <= 1e-12, "({i},{j}) = {v}");
        }
    }
    let envelope = json(&dir.path().join("kernel.json"));
    assert_eq!(envelope["n"], 4);
    assert_eq!(envelope["method"], "quadrature");
    assert_eq!(envelope["B"], 0.0);
}

#[test]
fn orthonormal_restricted_eigenvalue_entry() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk(
        "bounds",
        dir.path(),
        &["--set", "dataset.generator=orthonormal", "--set", "dataset.params.d=8", "--set", "dataset.params.n=6"],
    );
    let report = json(&dir.path().join("report.json"));
    let entry = &report["restricted_eig_lower"];
    assert!((entry["bound"].as_f64().unwrap() - 0.25).abs() <= 1e-12);
    assert_eq!(entry["verdict"], "pass");
    assert!(report["movement_dw"]["measured"].as_f64().is_some());
    assert!(report.as_object().unwrap().values().all(|e| e["instantiates"].is_string()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn huge_step_fails_bounds_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("bounds", dir.path(), &["--set", "train.eta=1e4"]);
    assert_eq!(code(&o), 4);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["convergence_rate"]["verdict"], "fail");
}

#[test]
fn huge_step_in_train_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sntk("train", dir.path(), &["--set", "train.eta=1e4"])), 3);
}

#[test]
fn corrupt_checkpoint_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bin");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let o = sntk("verify", &dir.path().join("out"), &["--set", &format!("model.checkpoint={}", bad.display())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("format"));
}

#[test]
fn checkpoint_resumes_training() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sntk("train", &dir.path().join("a"), &[])), 0);
    let ckpt = dir.path().join("a/checkpoint.bin");
    let o = sntk("train", &dir.path().join("b"), &["--set", &format!("model.checkpoint={}", ckpt.display())]);
    assert_eq!(code(&o), 0);
    let first = json(&dir.path().join("a/summary.json"));
    let second = json(&dir.path().join("b/summary.json"));
    assert_eq!(first["final_loss"], second["initial_loss"]);
}

#[test]
fn saturated_bias_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("sparsity", dir.path(), &["--set", "model.B=50"]);
    assert_eq!(code(&o), 0);
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["initial_fraction"], 0.0);
    assert_eq!(summary["max_relative_drift"], 0.0);
}

#[test]
fn verify_passes_on_defaults_and_another_seed() {
    for seed in ["1", "99"] {
        let dir = tempfile::tempdir().unwrap();
        let o = sntk("verify", dir.path(), &["--seed", seed]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        let rows = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
        assert_eq!(rows.lines().filter(|l| l.ends_with(",pass")).count(), 6);
    }
}

#[test]
fn bench_reports_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = sntk("bench", dir.path(), &["--set", "model.B=1.5", "--set", "model.init=standard"]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("bench.json"));
    for key in ["m", "B", "active_fraction", "dense_ns", "sparse_ns", "speedup"] {
        assert!(!r[key].is_null(), "{key}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let formats = ["--set", r#"output.formats=["csv","json","svg"]"#];
    for cmd in ["train", "sparsity", "ntk", "bounds"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        sntk(cmd, &a, &formats);
        sntk(cmd, &b, &formats);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 2, "{cmd}: {names:?}");
        for name in names.iter().filter(|n| *n != "run.log") {
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{cmd}: {name:?}");
        }
    }
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".lock"), "").unwrap();
    let o = sntk("train", dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}
