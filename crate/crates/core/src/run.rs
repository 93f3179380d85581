//! One end-to-end run: load, sample, train, evaluate, export.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mnist::{load_idx_images, load_idx_labels, sample_subset_indices, subset_dataset, SubsetIndices};
use crate::model::{Dataset, Hyperparameters};
use crate::pipeline::{evaluate_codes, test_codes, train, EvalReport, Method, TrainedModel};

pub const METRICS_FILE: &str = "metrics.json";
pub const CODES_FILE: &str = "codes.csv";
pub const MODEL_FILE: &str = "model.bin";
pub const FEATURE_GRAPH_FILE: &str = "feature_graph.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
    pub method: Method,
    /// `seed` drives both subset sampling and training.
    pub hyperparameters: Hyperparameters,
    pub out_dir: PathBuf,
    pub export_codes: bool,
    pub export_model: bool,
    pub export_feature_graph: bool,
}

/// Contents of `metrics.json`. Field order is the key order on disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub method: Method,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub surrogate_test_accuracy: f64,
    pub objective_trace: Vec<f64>,
    pub wall_time_seconds: f64,
}

/// DG-DL trains on the labelled block alone, so its neighbour count must
/// stay below `n_train`; larger values are lowered to `n_train - 1`.
pub fn effective_hyperparameters(hp: &Hyperparameters, method: Method, n_train: usize) -> Hyperparameters {
    let mut hp = hp.clone();
    if method == Method::DgDl && n_train >= 2 && hp.k >= n_train {
        log::warn!(
            "k = {} lowered to {} for {} labelled samples",
            hp.k,
            n_train - 1,
            n_train
        );
        hp.k = n_train - 1;
    }
    hp
}

/// Trains and evaluates on an already assembled dataset.
pub fn train_and_evaluate(
    ds: &Dataset,
    hp: &Hyperparameters,
    method: Method,
) -> Result<(TrainedModel, Array2<f64>, EvalReport)> {
    let model = train(ds, hp, method)?;
    let codes = test_codes(&model, ds, hp)?;
    let report = evaluate_codes(&model, ds, codes.view(), hp.k_cls)?;
    Ok((model, codes, report))
}

pub fn run(config: &RunConfig) -> Result<Metrics> {
    let start = Instant::now();
    let images = load_idx_images(&config.images)?;
    let labels = load_idx_labels(&config.labels)?;
    if images.ncols() != labels.len() {
        return Err(Error::invalid(format!(
            "{} holds {} images but {} holds {} labels",
            config.images.display(),
            images.ncols(),
            config.labels.display(),
            labels.len()
        )));
    }
    let indices = sample_subset_indices(&labels, config.n_train, config.n_test, config.hyperparameters.seed)?;
    let ds = subset_dataset(images.view(), &labels, &indices)?;
    let hp = effective_hyperparameters(&config.hyperparameters, config.method, ds.n_train());

    let (model, codes, report) = train_and_evaluate(&ds, &hp, config.method)?;
    log::info!(
        "{}: train {:.4}, test {:.4}, surrogate {:.4}",
        config.method,
        report.train_accuracy,
        report.test_accuracy,
        report.surrogate_test_accuracy
    );

    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    if config.export_codes {
        write_codes_csv(
            &config.out_dir.join(CODES_FILE),
            &ds,
            &indices,
            model.codes.train(),
            codes.view(),
        )?;
    }
    if config.export_model {
        model.save(config.out_dir.join(MODEL_FILE))?;
    }
    if config.export_feature_graph {
        write_matrix_csv(&config.out_dir.join(FEATURE_GRAPH_FILE), model.l_d.view())?;
    }

    let metrics = Metrics {
        method: config.method,
        seed: hp.seed,
        hyperparameters: hp,
        train_accuracy: report.train_accuracy,
        test_accuracy: report.test_accuracy,
        surrogate_test_accuracy: report.surrogate_test_accuracy,
        objective_trace: model.objective_trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path = config.out_dir.join(METRICS_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &metrics)?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&path, e))?;
    Ok(metrics)
}

/// One row per sample, no header: source index, `train` or `test`, true
/// label, then the code values.
pub fn write_codes_csv(
    path: &Path,
    ds: &Dataset,
    indices: &SubsetIndices,
    train_codes: ArrayView2<f64>,
    test_codes: ArrayView2<f64>,
) -> Result<()> {
    let test_labels = ds.test_labels().unwrap_or(&[]);
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let blocks = [
        ("train", &indices.train, ds.train_labels(), train_codes),
        ("test", &indices.test, test_labels.to_vec(), test_codes),
    ];
    for (split, ids, truth, codes) in blocks {
        for (j, (&id, &label)) in ids.iter().zip(&truth).enumerate() {
            let mut record = vec![id.to_string(), split.to_string(), label.to_string()];
            record.extend(codes.column(j).iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_csv(path: &Path, m: ArrayView2<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.rows() {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
