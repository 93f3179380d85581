use ndarray::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use super::prox::ROUNDING_SLACK;
use super::{StepReport, LIPSCHITZ_SAFETY};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, frobenius_sq, top_eigenvalue_psd, POWER_ITERATIONS};
use crate::model::{Dataset, Dictionary, Hyperparameters, SparseCodes};

/// Atoms shorter than this before rescaling are redrawn at random.
const DEGENERATE_NORM: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

/// `||X - DA||² + α tr(Dᵀ L_D D)` expanded around `AAᵀ` and `XAᵀ`.
struct DictionaryBlock<'a> {
    x_norm_sq: f64,
    xat: Array2<f64>,
    aat: Array2<f64>,
    l_d: ArrayView2<'a, f64>,
    alpha: f64,
}

impl DictionaryBlock<'_> {
    fn value(&self, d: &Array2<f64>) -> f64 {
        let d_aat = d.dot(&self.aat);
        let mut value =
            self.x_norm_sq - 2.0 * frobenius_dot(self.xat.view(), d.view()) + frobenius_dot(d_aat.view(), d.view());
        if self.alpha > 0.0 {
            value += self.alpha * frobenius_dot(self.l_d.dot(d).view(), d.view());
        }
        value
    }

    fn gradient(&self, d: &Array2<f64>) -> Array2<f64> {
        let mut grad = (d.dot(&self.aat) - &self.xat) * 2.0;
        if self.alpha > 0.0 {
            grad.scaled_add(2.0 * self.alpha, &self.l_d.dot(d));
        }
        grad
    }
}

fn check_dims(ds: &Dataset, d: ArrayView2<f64>, a: &SparseCodes, l_d: ArrayView2<f64>) -> Result<()> {
    let n = ds.n_features();
    let ok = d.nrows() == n && a.n_atoms() == d.ncols() && a.n_samples() == ds.n_samples() && l_d.dim() == (n, n);
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dictionary update: inconsistent shapes (X {:?}, D {:?}, A {:?}, L_D {:?})",
            ds.x().dim(),
            d.dim(),
            a.matrix().dim(),
            l_d.dim()
        )))
    }
}

/// Gradient `2(DA - X)Aᵀ + 2α L_D D` of the dictionary block at `d`.
pub fn dictionary_gradient(
    ds: &Dataset,
    d: ArrayView2<f64>,
    a: &SparseCodes,
    l_d: ArrayView2<f64>,
    hp: &Hyperparameters,
) -> Result<Array2<f64>> {
    check_dims(ds, d, a, l_d)?;
    let residual = &d.dot(&a.matrix()) - &ds.x();
    let mut grad = residual.dot(&a.matrix().t()) * 2.0;
    grad.scaled_add(2.0 * hp.alpha, &l_d.dot(&d));
    Ok(grad)
}

/// Rescales columns to unit norm; near-zero columns are replaced by random
/// unit vectors drawn from `rng`.
fn project_columns<R: Rng + ?Sized>(mut d: Array2<f64>, rng: &mut R) -> Array2<f64> {
    for mut col in d.columns_mut() {
        let mut norm = col.dot(&col).sqrt();
        while norm.is_nan() || norm < DEGENERATE_NORM {
            col.mapv_inplace(|_| rng.sample(StandardNormal));
            norm = col.dot(&col).sqrt();
        }
        col /= norm;
    }
    d
}

/// Projected gradient on `||X - DA||² + α tr(Dᵀ L_D D)` over unit-norm
/// atoms, starting from `d_init`.
///
/// The step is `1 / (2 (σ_max(A)² + α σ_max(L_D)))` scaled down by
/// [`LIPSCHITZ_SAFETY`], halved whenever a projected step would increase the
/// objective. Runs at most `hp.du_iters` iterations or until the relative
/// decrease drops below `hp.tol`.
pub fn dictionary_update_step<R: Rng + ?Sized>(
    ds: &Dataset,
    d_init: &Dictionary,
    a: &SparseCodes,
    l_d: ArrayView2<f64>,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<(Dictionary, StepReport)> {
    check_dims(ds, d_init.atoms(), a, l_d)?;
    let codes = a.matrix();
    let block = DictionaryBlock {
        x_norm_sq: frobenius_sq(ds.x()),
        xat: ds.x().dot(&codes.t()),
        aat: codes.dot(&codes.t()),
        l_d,
        alpha: hp.alpha,
    };
    let codes_top = top_eigenvalue_psd(block.aat.nrows(), POWER_ITERATIONS, |v| block.aat.dot(&v));
    let graph_top = if hp.alpha > 0.0 {
        top_eigenvalue_psd(l_d.nrows(), POWER_ITERATIONS, |v| l_d.dot(&v))
    } else {
        0.0
    };
    let lipschitz = 2.0 * (codes_top + hp.alpha * graph_top);

    let mut d = d_init.atoms().to_owned();
    let mut value = block.value(&d);
    let initial = value;
    if !value.is_finite() {
        return Err(Error::Divergence {
            stage: "dictionary update",
            step: f64::NAN,
        });
    }
    if lipschitz == 0.0 {
        let report = StepReport {
            iterations_used: 0,
            initial_objective: initial,
            final_objective: initial,
            converged: true,
        };
        return Ok((d_init.clone(), report));
    }

    let mut step = 1.0 / (LIPSCHITZ_SAFETY * lipschitz);
    let mut converged = false;
    let mut used = 0;
    'outer: for it in 1..=hp.du_iters {
        used = it;
        let grad = block.gradient(&d);
        let mut halvings = 0;
        let (candidate, candidate_value) = loop {
            let candidate = project_columns(&d - &(&grad * step), rng);
            let candidate_value = block.value(&candidate);
            if !candidate_value.is_finite() {
                return Err(Error::Divergence {
                    stage: "dictionary update",
                    step,
                });
            }
            if candidate_value <= value + ROUNDING_SLACK * value.abs().max(1.0) {
                break (candidate, candidate_value);
            }
            if halvings == MAX_HALVINGS {
                converged = true;
                break 'outer;
            }
            step /= 2.0;
            halvings += 1;
        };
        let decrease = (value - candidate_value) / value.abs().max(f64::MIN_POSITIVE);
        if candidate == d {
            converged = true;
            break;
        }
        d = candidate;
        value = candidate_value;
        if hp.tol > 0.0 && decrease < hp.tol {
            converged = true;
            break;
        }
    }

    let report = StepReport {
        iterations_used: used,
        initial_objective: initial,
        final_objective: value,
        converged,
    };
    Ok((Dictionary::from_projected(d), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(alpha: f64) -> Hyperparameters {
        Hyperparameters {
            alpha,
            du_iters: 500,
            tol: 0.0,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn identity_codes_give_normalized_samples() {
        let x = array![[0.3, -1.0, 0.2], [0.4, 0.5, 0.0], [1.2, 0.1, -0.6]];
        let ds = Dataset::new(x.clone(), 0, Array2::zeros((2, 0))).unwrap();
        let a = SparseCodes::new(Array2::eye(3), 0).unwrap();
        let d0 = Dictionary::normalized(Array2::ones((3, 3))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, report) =
            dictionary_update_step(&ds, &d0, &a, Array2::zeros((3, 3)).view(), &settings(0.0), &mut rng).unwrap();
        let mut expected = x.clone();
        for mut col in expected.columns_mut() {
            let norm = col.dot(&col).sqrt();
            col /= norm;
        }
        assert_abs_diff_eq!(d.atoms(), expected, epsilon = 1e-10);
        assert!(report.is_monotone());
    }

    #[test]
    fn degenerate_atoms_are_redrawn() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = project_columns(array![[0.0, 3.0], [0.0, 4.0]], &mut rng);
        for col in d.columns() {
            assert_abs_diff_eq!(col.dot(&col), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(d[[1, 1]], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_codes_and_zero_smoothness_leave_the_dictionary() {
        let ds = Dataset::new(Array2::ones((2, 3)), 0, Array2::zeros((2, 0))).unwrap();
        let a = SparseCodes::new(Array2::zeros((2, 3)), 0).unwrap();
        let d0 = Dictionary::new(Array2::eye(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (d, report) =
            dictionary_update_step(&ds, &d0, &a, Array2::zeros((2, 2)).view(), &settings(0.0), &mut rng).unwrap();
        assert_eq!(d, d0);
        assert_eq!(report.iterations_used, 0);
    }
}
