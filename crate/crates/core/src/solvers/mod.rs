//! Block minimisation steps of the alternating scheme.
//!
//! * [`sparse_coding_step`]: ℓ1-composite problem in the codes, solved by
//!   monotone FISTA with momentum restart.
//! * [`dictionary_update_step`]: projected gradient on the product of unit
//!   spheres.
//! * [`classifier_update_step`]: closed-form ridge solution.
//!
//! Each step only decreases its own block of the joint objective, which is
//! what makes the outer alternation monotone.

mod classifier;
mod dictionary;
mod prox;
mod sparse_coding;

pub use classifier::classifier_update_step;
pub use dictionary::{dictionary_gradient, dictionary_update_step};
pub use prox::soft_threshold;
pub use sparse_coding::{
    code_single_sample, single_sample_gradient, sparse_coding_gradient, sparse_coding_objective, sparse_coding_step,
    SingleSampleProblem,
};

/// Multiplier applied to power-iteration Lipschitz estimates.
pub const LIPSCHITZ_SAFETY: f64 = 2.0;

/// Outcome of one block step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iterations_used: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub converged: bool,
}

impl StepReport {
    /// `final <= initial + 1e-8 (1 + |initial|)`.
    pub fn is_monotone(&self) -> bool {
        self.final_objective <= self.initial_objective + 1e-8 * (1.0 + self.initial_objective.abs())
    }
}
