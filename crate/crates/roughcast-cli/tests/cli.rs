//! End-to-end tests of the `roughcast` binary: exit codes, flag plumbing,
//! and the generate → extract → run → report flow on a desk-scale config.

use std::path::Path;
use std::process::{Command, Output};

fn roughcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Tiny synthetic run: one technique, 12 samples, 64-point traces.
fn tiny_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "dataset": {"synthetic": {"seed": 7, "experiments_per_technique": 1, "samples_per_experiment": 12, "trace_length": 64}},
  "settings": ["milling"],
  "bands": 8,
  "top_k": 3,
  "explain_rows": 4,
  "attribution": {"permutations": 8, "background_rows": 4, "seed": 0},
  "mlp": {"mode": "fixed", "hidden_widths": [3], "activation": "relu",
          "train": {"learning_rate": 0.01, "batch_size": 4, "max_epochs": 30, "l1": 0.0, "l2": 0.0001, "optimizer": "adam", "seed": 0, "early_stopping_patience": 10}}
}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"sede": 1}"#).unwrap();
    let out = roughcast(&["--config", path.to_str().unwrap(), "run", "all"]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn zero_threads_is_a_validation_error() {
    let out = roughcast(&["--threads", "0", "run", "all"]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr(&out));
}

#[test]
fn missing_dataset_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"dataset": {"path": "/nonexistent/roughcast-data"}}"#,
    )
    .unwrap();
    let out = roughcast(&["--config", path.to_str().unwrap(), "run", "params-only"]);
    assert_eq!(exit_code(&out), 4, "stderr: {}", stderr(&out));
}

#[test]
fn diverging_training_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diverge.json");
    std::fs::write(
        &path,
        r#"{
  "dataset": {"synthetic": {"seed": 7, "experiments_per_technique": 1, "samples_per_experiment": 12, "trace_length": 64}},
  "settings": ["milling"],
  "bands": 8,
  "mlp": {"mode": "fixed", "hidden_widths": [3], "activation": "relu",
          "train": {"learning_rate": 1e18, "batch_size": 4, "max_epochs": 60, "l1": 0.0, "l2": 0.0, "optimizer": "sgd", "seed": 0, "early_stopping_patience": 60}}
}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = roughcast(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "run",
        "params-only",
    ]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn generate_extract_run_report_flow() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out_flag = out_dir.to_str().unwrap();

    // generate: dataset written under <out>/dataset
    let out = roughcast(&["--config", &config, "--out", out_flag, "generate"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(out_dir.join("dataset/manifest.json").is_file());

    // extract: features.csv covers the whole dataset (12 samples for each of
    // the five techniques) plus a header
    let out = roughcast(&["--config", &config, "--out", out_flag, "extract"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("features.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 12);
    assert!(csv.lines().next().unwrap().ends_with(",target.final_roughness"));

    // run reduced with a seed override: reports and a manifest carrying the
    // override for both the pipeline and the synthetic source
    let out = roughcast(&[
        "--config", &config, "--out", out_flag, "--seed", "9", "run", "reduced",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let table_path = out_dir.join("table_reduced.csv");
    assert!(table_path.is_file());
    assert!(out_dir.join("reduced_models.json").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["dataset"]["synthetic"]["seed"], 9);
    let table_before = std::fs::read(&table_path).unwrap();

    // report --svg: reruns the manifest, reproduces the table byte-for-byte,
    // and renders the scatter plot
    let out = roughcast(&["--out", out_flag, "report", "--svg"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(std::fs::read(&table_path).unwrap(), table_before);
    assert!(out_dir.join("scatter_milling.svg").is_file());
}

#[test]
fn ablate_accepts_a_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = roughcast(&[
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "ablate",
        "--k",
        "2,3",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,technique,test_r2,test_rmse");
    assert_eq!(lines.len(), 1 + 2, "one row per k for the single setting");
    assert!(lines[1].starts_with("2,milling,"));
    assert!(lines[2].starts_with("3,milling,"));
}
