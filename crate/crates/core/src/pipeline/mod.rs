//! Training orchestration for the semi-supervised (SS-DG-DL) and supervised
//! (DG-DL) methods, plus evaluation and model persistence.

mod container;
mod evaluate;

use std::fmt;

use ndarray::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use container::{CONTAINER_MAGIC, CONTAINER_VERSION};
pub use evaluate::{
    classify, code_test_sample_dg_dl, evaluate, evaluate_codes, knn_surrogate_classify, test_codes, EvalReport,
    TestCoder,
};

use crate::error::{Error, Result};
use crate::feature_graph::learn_feature_graph;
use crate::lle::build_sample_graph;
use crate::model::{
    objective_value, Dataset, Dictionary, Hyperparameters, LinearClassifier, SparseCodes, ZeroLaplacian,
};
use crate::solvers::{classifier_update_step, dictionary_update_step, sparse_coding_step, StepReport};

/// Which training objective produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Method {
    /// Labelled and unlabelled samples share the sample graph and codes.
    #[serde(rename = "ss-dg-dl")]
    #[value(name = "ss-dg-dl")]
    SsDgDl,
    /// Labelled samples only; unlabelled samples are coded afterwards.
    #[serde(rename = "dg-dl")]
    #[value(name = "dg-dl")]
    DgDl,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SsDgDl => f.write_str("SS-DG-DL"),
            Method::DgDl => f.write_str("DG-DL"),
        }
    }
}

/// Step reports of one outer round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub sparse_coding: StepReport,
    pub dictionary: StepReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub method: Method,
    pub dictionary: Dictionary,
    pub codes: SparseCodes,
    pub classifier: LinearClassifier,
    /// Sample-graph regulariser over the training columns of `codes`.
    pub l_a: Array2<f64>,
    /// Learned feature-graph Laplacian.
    pub l_d: Array2<f64>,
    /// Objective after initialisation, then after every outer round.
    pub objective_trace: Vec<f64>,
    /// Per-round step reports; empty for models read from disk.
    pub rounds: Vec<RoundReport>,
}

impl TrainedModel {
    /// `true` when every consecutive pair of the trace decreases or rises by
    /// at most `rel_tol` relative.
    pub fn trace_is_monotone(&self, rel_tol: f64) -> bool {
        self.objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_tol * w[0].abs().max(1.0))
    }
}

fn random_dictionary<R: rand::Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Dictionary> {
    let atoms = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(rng));
    Dictionary::normalized(atoms)
}

fn initialize_with<R: rand::Rng + ?Sized>(
    ds: &Dataset,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<(Dictionary, SparseCodes, LinearClassifier)> {
    hp.validate()?;
    let d = random_dictionary(ds.n_features(), hp.p, rng)?;
    let lasso = Hyperparameters {
        beta: 0.0,
        gamma: 0.0,
        ..hp.clone()
    };
    let zero_w = LinearClassifier::zeros(ds.n_classes(), hp.p);
    let (a, _) = sparse_coding_step(
        ds,
        &d,
        &SparseCodes::zeros(hp.p, ds),
        &zero_w,
        &ZeroLaplacian(ds.n_samples()),
        &lasso,
    )?;
    let w = classifier_update_step(a.train(), ds.y_train(), hp.gamma, hp.mu)?;
    Ok((d, a, w))
}

/// Random normal dictionary with unit atoms, LASSO codes against it, and the
/// classifier fitted to those codes. Deterministic in `hp.seed`.
pub fn initialize(ds: &Dataset, hp: &Hyperparameters) -> Result<(Dictionary, SparseCodes, LinearClassifier)> {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    initialize_with(ds, hp, &mut rng)
}

fn fit(ds: &Dataset, hp: &Hyperparameters, method: Method) -> Result<TrainedModel> {
    hp.validate_for(ds.n_samples())?;
    log::info!(
        "{method}: n = {}, N = {} ({} labelled), p = {}",
        ds.n_features(),
        ds.n_samples(),
        ds.n_train(),
        hp.p
    );
    let feature_graph = learn_feature_graph(ds.x(), hp.theta, hp.graph_iters, hp.graph_tol)?;
    log::debug!(
        "feature graph: objective {:.6e} after {} iterations (converged: {})",
        feature_graph.objective(),
        feature_graph.iterations(),
        feature_graph.converged()
    );
    let l_d = feature_graph.into_laplacian();
    let sample_graph = build_sample_graph(ds.x(), hp.k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let (mut d, mut a, mut w) = initialize_with(ds, hp, &mut rng)?;
    let mut trace = vec![objective_value(ds, &d, &a, &w, &sample_graph, l_d.view(), hp)?];
    let mut rounds = Vec::with_capacity(hp.outer_iters);

    for round in 1..=hp.outer_iters {
        let (codes, sparse_coding) = sparse_coding_step(ds, &d, &a, &w, &sample_graph, hp)?;
        a = codes;
        let (dict, dictionary) = dictionary_update_step(ds, &d, &a, l_d.view(), hp, &mut rng)?;
        d = dict;
        w = classifier_update_step(a.train(), ds.y_train(), hp.gamma, hp.mu)?;
        rounds.push(RoundReport {
            sparse_coding,
            dictionary,
        });

        let value = objective_value(ds, &d, &a, &w, &sample_graph, l_d.view(), hp)?;
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(value);
        log::debug!(
            "round {round}: objective {value:.6e} (coding {} its, dictionary {} its)",
            sparse_coding.iterations_used,
            dictionary.iterations_used
        );
        if (previous - value).abs() < hp.tol * previous.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    Ok(TrainedModel {
        method,
        dictionary: d,
        codes: a,
        classifier: w,
        l_a: sample_graph.into_l_a(),
        l_d,
        objective_trace: trace,
        rounds,
    })
}

/// Semi-supervised training on all of `ds`: graphs are built over every
/// sample and the unlabelled codes come out of the optimisation.
pub fn train_ss_dg_dl(ds: &Dataset, hp: &Hyperparameters) -> Result<TrainedModel> {
    if ds.n_train() == 0 {
        return Err(Error::invalid("SS-DG-DL needs at least one labelled sample"));
    }
    fit(ds, hp, Method::SsDgDl)
}

/// Supervised training on the labelled block of `ds` only.
pub fn train_dg_dl(ds: &Dataset, hp: &Hyperparameters) -> Result<TrainedModel> {
    if ds.n_train() < hp.k + 1 {
        return Err(Error::invalid(format!(
            "DG-DL needs n_train >= k + 1, got n_train = {} with k = {}",
            ds.n_train(),
            hp.k
        )));
    }
    fit(&ds.labelled_only(), hp, Method::DgDl)
}

pub fn train(ds: &Dataset, hp: &Hyperparameters, method: Method) -> Result<TrainedModel> {
    match method {
        Method::SsDgDl => train_ss_dg_dl(ds, hp),
        Method::DgDl => train_dg_dl(ds, hp),
    }
}
