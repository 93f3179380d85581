//! Semi-supervised dictionary learning with dual graph regularisation.
//!
//! Samples are coded over a learned dictionary `D` while two graphs shape
//! the solution: a feature graph `L_D`, learned from the data, keeps atoms
//! smooth across correlated features, and a sample graph `L_A`, built from
//! locally linear reconstructions over labelled and unlabelled samples
//! alike, keeps codes consistent with the data manifold. A linear classifier
//! is trained on the labelled codes in the same objective.
//!
//! ```
//! use ssdl::synthetic::Blobs;
//! use ssdl::{train, evaluate, Hyperparameters, Method};
//!
//! let blobs = Blobs { n_features: 8, n_classes: 3, spread: 0.05, seed: 1 };
//! let ds = blobs.dataset(9, 30).unwrap();
//! let hp = Hyperparameters { k: 5, p: 6, outer_iters: 5, ..Hyperparameters::default() };
//! let model = train(&ds, &hp, Method::SsDgDl).unwrap();
//! let report = evaluate(&model, &ds, &hp).unwrap();
//! assert!(report.test_accuracy > 0.5);
//! ```

pub mod error;
pub mod feature_graph;
pub mod linalg;
pub mod lle;
pub mod mnist;
pub mod model;
pub mod pipeline;
pub mod run;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
pub use feature_graph::{learn_feature_graph, FeatureGraph};
pub use lle::{build_sample_graph, find_knn, lle_weights, NeighborIndex, SampleGraph};
pub use mnist::{load_idx_images, load_idx_labels, sample_subset};
pub use model::{
    objective_terms, objective_value, Dataset, Dictionary, Hyperparameters, LaplacianOperator, LinearClassifier,
    ObjectiveTerms, SparseCodes,
};
pub use pipeline::{
    code_test_sample_dg_dl, evaluate, initialize, train, train_dg_dl, train_ss_dg_dl, EvalReport, Method, TrainedModel,
};
pub use run::{run, Metrics, RunConfig};
pub use solvers::{classifier_update_step, dictionary_update_step, sparse_coding_step, StepReport};

/// The guide's snippets, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/sample_graph.md")]
    mod sample_graph {}
    #[doc = include_str!("../../../book/src/feature_graph.md")]
    mod feature_graph {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/mnist_cli.md")]
    mod mnist_cli {}
}
