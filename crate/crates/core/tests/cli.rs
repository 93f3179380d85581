mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::blobs;
use ssdl::mnist::{write_idx_images, write_idx_labels};
use ssdl::TrainedModel;

const BIN: &str = env!("CARGO_BIN_EXE_ssdl");

/// Blobs quantised to bytes and written as an IDX pair.
fn blobs_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let (x, labels) = blobs(0).sample(600);
    let pixels = x.mapv(|v| (v * 255.0).round() as u8);
    let images = dir.join("images.idx");
    let label_path = dir.join("labels.idx");
    write_idx_images(&images, pixels.view(), 2, 5).unwrap();
    let bytes: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    write_idx_labels(&label_path, &bytes).unwrap();
    (images, label_path)
}

fn ssdl(images: &Path, labels: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    ssdl_with_threads(images, labels, out, extra, "1")
}

fn ssdl_with_threads(images: &Path, labels: &Path, out: &Path, extra: &[&str], threads: &str) -> std::process::Output {
    Command::new(BIN)
        .args([
            "--images",
            images.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
        ])
        .args([
            "--n-train",
            "30",
            "--n-test",
            "300",
            "--k",
            "10",
            "--p",
            "16",
            "--outer-iters",
            "15",
        ])
        .args(["--out", out.to_str().unwrap()])
        .args(extra)
        .env("SSDL_THREADS", threads)
        .output()
        .unwrap()
}

fn metrics(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn blobs_run_writes_metrics_codes_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = blobs_fixture(dir.path());
    let out = dir.path().join("out");
    let status = ssdl(
        &images,
        &labels,
        &out,
        &["--export-codes", "--export-model", "--export-feature-graph"],
    );
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let m = metrics(&out);
    let text = std::fs::read_to_string(out.join("metrics.json")).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    assert_eq!(
        keys,
        [
            "method",
            "seed",
            "hyperparameters",
            "train_accuracy",
            "test_accuracy",
            "surrogate_test_accuracy",
            "objective_trace",
            "wall_time_seconds"
        ]
    );
    assert_eq!(m["method"], "ss-dg-dl");
    assert!(m["test_accuracy"].as_f64().unwrap() >= 0.9, "{m}");

    let codes = std::fs::read_to_string(out.join("codes.csv")).unwrap();
    let rows: Vec<Vec<&str>> = codes.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 330);
    assert!(rows.iter().all(|r| r.len() == 16 + 3));
    assert_eq!(rows.iter().filter(|r| r[1] == "train").count(), 30);
    assert_eq!(rows.iter().filter(|r| r[1] == "test").count(), 300);

    let model = TrainedModel::load(out.join("model.bin")).unwrap();
    assert_eq!(model.codes.n_samples(), 330);
    let graph = std::fs::read_to_string(out.join("feature_graph.csv")).unwrap();
    assert_eq!(graph.lines().count(), 10);
}

#[test]
fn repeated_runs_differ_only_in_wall_time_whatever_the_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = blobs_fixture(dir.path());
    for method in ["ss-dg-dl", "dg-dl"] {
        let mut docs = Vec::new();
        for threads in ["1", "1", "3"] {
            let out = dir.path().join(format!("{method}-{}", docs.len()));
            let status = ssdl_with_threads(&images, &labels, &out, &["--method", method, "--seed", "3"], threads);
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            let text = std::fs::read_to_string(out.join("metrics.json")).unwrap();
            let kept: Vec<&str> = text.lines().filter(|l| !l.contains("wall_time_seconds")).collect();
            docs.push(kept.join("\n"));
        }
        assert_eq!(docs[0], docs[1]);
        assert_eq!(docs[0], docs[2], "{method} depends on the thread count");
    }
}

#[test]
fn missing_image_file_fails_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.idx");
    let out = ssdl(&missing, &missing, &dir.path().join("out"), &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(missing.to_str().unwrap()));
}

#[test]
fn bad_thread_setting_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = blobs_fixture(dir.path());
    let out = Command::new(BIN)
        .args([
            "--images",
            images.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
        ])
        .args(["--n-train", "30", "--n-test", "30"])
        .env("SSDL_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SSDL_THREADS"));
}

#[test]
fn oversized_subset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = blobs_fixture(dir.path());
    let out = Command::new(BIN)
        .args([
            "--images",
            images.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
        ])
        .args(["--n-train", "300", "--n-test", "301"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}
