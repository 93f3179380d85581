//! Small dense helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix};
use ndarray::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Power-iteration count used for every spectral estimate.
pub const POWER_ITERATIONS: usize = 30;

const POWER_SEED: u64 = 0x5eed_5eed;

/// Frobenius inner product `<a, b>`.
pub fn frobenius_dot(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frobenius_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn l1_norm(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// Deterministic pseudo-random starting vector for power iterations.
fn start_vector(dim: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng))
}

/// Largest eigenvalue of a symmetric positive semidefinite operator, estimated
/// by power iteration. Returns the final Rayleigh quotient.
pub fn top_eigenvalue_psd<F>(dim: usize, iterations: usize, apply: F) -> f64
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v = start_vector(dim);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = apply(v.view());
        estimate = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return estimate.max(0.0);
        }
        v = w / norm;
    }
    estimate.max(0.0)
}

/// `σ_max(m)²`, estimated by power iteration on the smaller Gram matrix.
pub fn spectral_norm_sq(m: ArrayView2<f64>) -> f64 {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if cols <= rows {
        let gram = m.t().dot(&m);
        top_eigenvalue_psd(cols, POWER_ITERATIONS, |v| gram.dot(&v))
    } else {
        let gram = m.dot(&m.t());
        top_eigenvalue_psd(rows, POWER_ITERATIONS, |v| gram.dot(&v))
    }
}

/// Solves `m x = rhs` column-wise for a symmetric positive definite `m`
/// through a Cholesky factorization. Never forms an inverse.
pub fn solve_spd(m: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n || rhs.nrows() != n {
        return Err(Error::invalid(format!(
            "solve_spd: system {}x{} with right-hand side {}x{}",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if n == 0 {
        return Ok(Array2::zeros(rhs.raw_dim()));
    }
    let to_na = |a: &Array2<f64>| DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let chol =
        Cholesky::new(to_na(m)).ok_or_else(|| Error::SingularSystem("matrix is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 0.0 || (min / max).powi(2) < 1e-14 {
        return Err(Error::SingularSystem(format!(
            "pivot ratio {:.3e} below 1e-7",
            min / max
        )));
    }
    let x = chol.solve(&to_na(rhs));
    Ok(Array2::from_shape_fn(rhs.raw_dim(), |(i, j)| x[(i, j)]))
}
