use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::model::LinearClassifier;

/// Exact minimiser of `γ ||Y - W A||²_F + μ ||W||²_F`:
/// `W = γ Y Aᵀ (γ A Aᵀ + μ I)⁻¹`, computed by a Cholesky solve.
///
/// With `γ > 0` the system is divided through by `γ`, so the result depends
/// on `μ / γ` only.
pub fn classifier_update_step(
    a_train: ArrayView2<f64>,
    y_train: ArrayView2<f64>,
    gamma: f64,
    mu: f64,
) -> Result<LinearClassifier> {
    if !(gamma >= 0.0 && mu >= 0.0 && gamma.is_finite() && mu.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma = {gamma} and mu = {mu} must be finite and >= 0"
        )));
    }
    if gamma == 0.0 && mu == 0.0 {
        return Err(Error::invalid("classifier update needs gamma > 0 or mu > 0"));
    }
    if a_train.ncols() != y_train.ncols() {
        return Err(Error::invalid(format!(
            "classifier update: {} code columns but {} label columns",
            a_train.ncols(),
            y_train.ncols()
        )));
    }
    let p = a_train.nrows();
    let c = y_train.nrows();
    if gamma == 0.0 {
        return LinearClassifier::new(Array2::zeros((c, p)));
    }
    let mut system = a_train.dot(&a_train.t());
    let ridge = mu / gamma;
    system.diag_mut().mapv_inplace(|v| v + ridge);
    let rhs = a_train.dot(&y_train.t());
    let w_t = solve_spd(&system, &rhs)?;
    LinearClassifier::new(w_t.reversed_axes())
}
