use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mibench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mibench"))
        .args(args)
        .env("MIBENCH_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A training config small enough for a test.
fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        r#"{{
  "task": {{"kind": "gaussian-mixture", "n_stacks": 1, "dataset_size": 2000}},
  "estimator": {{"kind": "smile"}},
  "critic": {{"hidden": [32], "embedding_dim": 8}},
  "batch_size": 32,
  "iterations": 300,
  "curve_every": 50,
  "oracle_samples": 20000,
  "seeds": [0, 1],
  "output": "{}"{extra}
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    (header, r.records().map(Result::unwrap).collect())
}

#[test]
fn oracle_prints_the_collapsed_case() {
    let o = mibench(&["oracle", "--task.n-stacks", "1", "--task.eps-mix", "0", "--task.delta-mix", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("mutual information")).unwrap();
    let value: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((value - 1.1640).abs() < 0.01, "{line}");
    assert!(text.contains("H(y|x)"));
}

#[test]
fn config_errors_exit_with_code_2() {
    for args in [
        vec!["train", "--batch-sise", "3"],
        vec!["train", "--batch-size", "1"],
        vec!["oracle", "--config", "/nonexistent/config.json"],
        vec!["sweep", "--axes.learning-rate", "[1]"],
        vec!["train", "--iterations"],
    ] {
        let o = mibench(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("error"));
    }
}

#[test]
fn numeric_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    // every row its own cluster leaves no code with two rows
    let o = mibench(&[
        "train", "--config", &config, "--task.dataset-size", "20", "--proposal.kind", "pq", "--quantizer.kind",
        "kmeans", "--quantizer.n-clusters", "20",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("fewer clusters"));
    let o = mibench(&["train", "--config", &config, "--learning-rate", "1e300", "--estimator.kind", "nwj"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn train_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let o = mibench(&["train", "--config", &config, "--proposal.kind", "pq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["runs.csv", "summary.csv", "report.txt", "config.json", "curve_seed0.csv", "curve_seed1.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let (header, runs) = read_rows(&out.join("runs.csv"));
    assert_eq!(
        header[..12],
        ["config_hash", "seed", "step", "estimator", "proposal", "b", "k", "n_clusters", "i_r", "l_f", "total", "true_mi"]
    );
    // mixture window: one epoch of 2000 / 32 steps, but at least 128
    assert_eq!(runs.len(), 2 * 128);
    let (curve_header, curve) = read_rows(&out.join("curve_seed0.csv"));
    assert_eq!(
        curve_header,
        ["step", "estimator", "proposal", "generative_part", "discriminative_part", "total"]
    );
    assert_eq!(curve.len(), 6);

    // summary recomputed from the raw records
    let totals: Vec<f64> = runs.iter().map(|r| r[10].parse().unwrap()).collect();
    let true_mi: f64 = runs[0][11].parse().unwrap();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let variance = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let (sh, summary) = read_rows(&out.join("summary.csv"));
    let col = |name: &str| sh.iter().position(|h| h == name).unwrap();
    let get = |name: &str| summary[0][col(name)].parse::<f64>().unwrap();
    assert_eq!(get("bias"), mean - true_mi);
    assert_eq!(get("variance"), variance);
    assert_eq!(get("mse"), (mean - true_mi) * (mean - true_mi) + variance);
    assert_eq!(get("n"), n);

    let first = fs::read(out.join("summary.csv")).unwrap();
    let o = mibench(&["train", "--config", &config, "--proposal.kind", "pq"]);
    assert!(o.status.success());
    assert_eq!(first, fs::read(out.join("summary.csv")).unwrap());

    let o = mibench(&["report", "--input", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("task"));
    assert!(stdout(&o).contains("smile"));
}

#[test]
fn generated_datasets_feed_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let data = dir.path().join("data");
    let o = mibench(&["gen-data", "--config", &config, "--out", data.to_str().unwrap(), "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(data.join("pairs.bin").exists() && data.join("pairs.json").exists());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(data.join("pairs.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["rows"], 2000);
    let o = mibench(&["train", "--config", &config, "--dataset", data.to_str().unwrap(), "--seeds", "[0]"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn sweep_runs_the_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(write_config(dir.path(), "")).unwrap();
    let sweep = format!(r#"{{"base": {base}, "axes": {{"batch_size": [16, 32], "seed": [0, 1]}}}}"#);
    let path = dir.path().join("sweep.json");
    fs::write(&path, sweep).unwrap();
    let o = mibench(&["sweep", "--config", path.to_str().unwrap(), "--base.iterations", "150"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_rows(&dir.path().join("out/summary.csv"));
    assert_eq!(rows.len(), 4);
    for name in ["bias", "variance", "mse", "n"] {
        assert!(header.iter().any(|h| h == name));
    }
    assert!(rows.iter().all(|r| r.iter().all(|c| !c.is_empty())));
    assert!(rows.iter().all(|r| &r[header.len() - 1] == "ok"));
}

#[test]
fn independent_variables_give_no_information() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let o = mibench(&[
        "train", "--config", &config, "--task.correlation", "0", "--task.eps-mix", "0", "--task.delta-mix", "0",
        "--task.dataset-size", "20000", "--iterations", "3000", "--batch-size", "64", "--estimator.kind", "infonce",
        "--seeds", "[0]",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_rows(&dir.path().join("out/summary.csv"));
    let bias: f64 = rows[0][header.iter().position(|h| h == "bias").unwrap()].parse().unwrap();
    assert!(bias.abs() < 0.05, "bias {bias}");
}
