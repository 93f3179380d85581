use ndarray::prelude::*;

use super::prox::{fista_l1, FistaSettings, SmoothPart};
use super::{StepReport, LIPSCHITZ_SAFETY};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, frobenius_sq, l1_norm, spectral_norm_sq};
use crate::model::{Dataset, Dictionary, Hyperparameters, LaplacianOperator, LinearClassifier, SparseCodes};

/// Smooth part of the coding block,
/// `||X - DA||² + β tr(A L_A Aᵀ) + γ ||Y - W A_train||²`,
/// with the data terms expanded around precomputed Gram products.
struct CodingSmooth<'a, L: ?Sized> {
    x_norm_sq: f64,
    dtx: Array2<f64>,
    gram: Array2<f64>,
    l_a: &'a L,
    beta: f64,
    gamma: f64,
    n_train: usize,
    y_norm_sq: f64,
    wty: Array2<f64>,
    wtw: Array2<f64>,
}

impl<'a, L: LaplacianOperator + ?Sized> CodingSmooth<'a, L> {
    fn new(ds: &Dataset, d: ArrayView2<f64>, w: ArrayView2<f64>, l_a: &'a L, hp: &Hyperparameters) -> Self {
        Self {
            x_norm_sq: frobenius_sq(ds.x()),
            dtx: d.t().dot(&ds.x()),
            gram: d.t().dot(&d),
            l_a,
            beta: hp.beta,
            gamma: hp.gamma,
            n_train: ds.n_train(),
            y_norm_sq: frobenius_sq(ds.y_train()),
            wty: w.t().dot(&ds.y_train()),
            wtw: w.t().dot(&w),
        }
    }

    fn lipschitz(&self, w: ArrayView2<f64>) -> f64 {
        let gram_top = crate::linalg::top_eigenvalue_psd(self.gram.nrows(), crate::linalg::POWER_ITERATIONS, |v| {
            self.gram.dot(&v)
        });
        let graph = if self.beta > 0.0 {
            self.l_a.spectral_radius()
        } else {
            0.0
        };
        let class = if self.gamma > 0.0 { spectral_norm_sq(w) } else { 0.0 };
        2.0 * (gram_top + self.beta * graph + self.gamma * class)
    }

    fn terms(&self, a: &Array2<f64>, with_gradient: bool) -> (f64, Option<Array2<f64>>) {
        let ga = self.gram.dot(a);
        let mut value =
            self.x_norm_sq - 2.0 * frobenius_dot(self.dtx.view(), a.view()) + frobenius_dot(ga.view(), a.view());
        let mut grad = with_gradient.then(|| (&ga - &self.dtx) * 2.0);

        if self.beta > 0.0 {
            if let Some(g) = grad.as_mut() {
                let al = self.l_a.right_apply(a.view());
                value += self.beta * frobenius_dot(al.view(), a.view());
                g.scaled_add(2.0 * self.beta, &al);
            } else {
                value += self.beta * self.l_a.quadratic_form(a.view());
            }
        }

        if self.gamma > 0.0 && self.n_train > 0 {
            let a_train = a.slice(s![.., ..self.n_train]);
            let wtwa = self.wtw.dot(&a_train);
            value += self.gamma
                * (self.y_norm_sq - 2.0 * frobenius_dot(self.wty.view(), a_train)
                    + frobenius_dot(wtwa.view(), a_train));
            if let Some(g) = grad.as_mut() {
                // Unlabelled columns get no classifier gradient.
                g.slice_mut(s![.., ..self.n_train])
                    .scaled_add(2.0 * self.gamma, &(&wtwa - &self.wty));
            }
        }
        (value, grad)
    }
}

impl<L: LaplacianOperator + ?Sized> SmoothPart for CodingSmooth<'_, L> {
    fn value(&self, x: &Array2<f64>) -> f64 {
        self.terms(x, false).0
    }

    fn value_and_gradient(&self, x: &Array2<f64>) -> (f64, Array2<f64>) {
        let (v, g) = self.terms(x, true);
        (v, g.expect("gradient requested"))
    }
}

fn check_coding_dims<L: LaplacianOperator + ?Sized>(
    ds: &Dataset,
    d: &Dictionary,
    a: ArrayView2<f64>,
    w: &LinearClassifier,
    l_a: &L,
) -> Result<()> {
    let p = d.n_atoms();
    let ok = d.n_features() == ds.n_features()
        && a.dim() == (p, ds.n_samples())
        && w.weights().dim() == (ds.n_classes(), p)
        && l_a.order() == ds.n_samples();
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "sparse coding: inconsistent shapes (X {:?}, D {:?}, A {:?}, W {:?}, L_A order {})",
            ds.x().dim(),
            d.atoms().dim(),
            a.dim(),
            w.weights().dim(),
            l_a.order()
        )))
    }
}

/// Block objective of the coding step, evaluated directly:
/// `||X - DA||² + β tr(A L_A Aᵀ) + γ ||Y - W A_train||² + λ ||A||₁`.
pub fn sparse_coding_objective<L: LaplacianOperator + ?Sized>(
    ds: &Dataset,
    d: &Dictionary,
    a: ArrayView2<f64>,
    w: &LinearClassifier,
    l_a: &L,
    hp: &Hyperparameters,
) -> Result<f64> {
    check_coding_dims(ds, d, a, w, l_a)?;
    let residual = &ds.x() - &d.atoms().dot(&a);
    let mut value = frobenius_sq(residual.view()) + hp.lambda * l1_norm(a);
    if hp.beta > 0.0 {
        value += hp.beta * l_a.quadratic_form(a);
    }
    if hp.gamma > 0.0 {
        let class = &ds.y_train() - &w.weights().dot(&a.slice(s![.., ..ds.n_train()]));
        value += hp.gamma * frobenius_sq(class.view());
    }
    Ok(value)
}

/// Gradient of the smooth part of the coding block at `a`:
/// `2Dᵀ(DA - X) + 2β A L_A + 2γ [Wᵀ(W A_train - Y) | 0]`.
pub fn sparse_coding_gradient<L: LaplacianOperator + ?Sized>(
    ds: &Dataset,
    d: &Dictionary,
    a: ArrayView2<f64>,
    w: &LinearClassifier,
    l_a: &L,
    hp: &Hyperparameters,
) -> Result<Array2<f64>> {
    check_coding_dims(ds, d, a, w, l_a)?;
    let smooth = CodingSmooth::new(ds, d.atoms(), w.weights(), l_a, hp);
    Ok(smooth.value_and_gradient(&a.to_owned()).1)
}

/// Minimises the coding block over `A` starting from `a_init`.
///
/// Runs at most `hp.sc_iters` iterations, stopping early once an accepted
/// step lowers the objective by less than `hp.tol` relative. The ℓ1 prox
/// with step `t` shrinks by `λ t`.
pub fn sparse_coding_step<L: LaplacianOperator + ?Sized>(
    ds: &Dataset,
    d: &Dictionary,
    a_init: &SparseCodes,
    w: &LinearClassifier,
    l_a: &L,
    hp: &Hyperparameters,
) -> Result<(SparseCodes, StepReport)> {
    check_coding_dims(ds, d, a_init.matrix(), w, l_a)?;
    let smooth = CodingSmooth::new(ds, d.atoms(), w.weights(), l_a, hp);
    let lipschitz = smooth.lipschitz(w.weights());
    let initial = sparse_coding_objective(ds, d, a_init.matrix(), w, l_a, hp)?;
    if lipschitz == 0.0 {
        let report = StepReport {
            iterations_used: 0,
            initial_objective: initial,
            final_objective: initial,
            converged: true,
        };
        return Ok((a_init.clone(), report));
    }
    let settings = FistaSettings {
        step: 1.0 / (LIPSCHITZ_SAFETY * lipschitz),
        l1: hp.lambda,
        max_iter: hp.sc_iters,
        tol: hp.tol,
        stage: "sparse coding",
    };
    let outcome = fista_l1(&smooth, a_init.matrix().to_owned(), &settings)?;
    let codes = SparseCodes::new(outcome.x, ds.n_train())?;
    let report = StepReport {
        iterations_used: outcome.iterations,
        initial_objective: initial,
        final_objective: sparse_coding_objective(ds, d, codes.matrix(), w, l_a, hp)?,
        converged: outcome.converged,
    };
    Ok((codes, report))
}

/// Coding problem of a single new sample against a fixed dictionary:
/// `||x - D a||² + β ||a - a_ref||² + λ ||a||₁`.
#[derive(Debug, Clone)]
pub struct SingleSampleProblem<'a> {
    pub dictionary: &'a Dictionary,
    /// `DᵀD`, shared across samples.
    pub gram: ArrayView2<'a, f64>,
    pub x: ArrayView1<'a, f64>,
    pub reference: ArrayView1<'a, f64>,
    pub beta: f64,
    pub lambda: f64,
}

struct SingleSmooth {
    x_norm_sq: f64,
    dtx: Array2<f64>,
    gram: Array2<f64>,
    beta: f64,
    reference: Array2<f64>,
}

impl SingleSmooth {
    fn new(problem: &SingleSampleProblem<'_>) -> Self {
        Self {
            x_norm_sq: problem.x.dot(&problem.x),
            dtx: problem.dictionary.atoms().t().dot(&problem.x).insert_axis(Axis(1)),
            gram: problem.gram.to_owned(),
            beta: problem.beta,
            reference: problem.reference.to_owned().insert_axis(Axis(1)),
        }
    }

    fn terms(&self, a: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
        let ga = self.gram.dot(a);
        let diff = a - &self.reference;
        let value = self.x_norm_sq - 2.0 * frobenius_dot(self.dtx.view(), a.view())
            + frobenius_dot(ga.view(), a.view())
            + self.beta * frobenius_sq(diff.view());
        (value, ga, diff)
    }
}

impl SmoothPart for SingleSmooth {
    fn value(&self, x: &Array2<f64>) -> f64 {
        self.terms(x).0
    }

    fn value_and_gradient(&self, x: &Array2<f64>) -> (f64, Array2<f64>) {
        let (value, ga, diff) = self.terms(x);
        let grad = (&ga - &self.dtx) * 2.0 + diff * (2.0 * self.beta);
        (value, grad)
    }
}

/// Gradient `2Dᵀ(Da - x) + 2β(a - a_ref)` of the smooth part.
pub fn single_sample_gradient(problem: &SingleSampleProblem<'_>, a: ArrayView1<f64>) -> Array1<f64> {
    let smooth = SingleSmooth::new(problem);
    smooth
        .value_and_gradient(&a.to_owned().insert_axis(Axis(1)))
        .1
        .index_axis_move(Axis(1), 0)
}

/// Codes one sample by FISTA, starting from `problem.reference`.
pub fn code_single_sample(
    problem: &SingleSampleProblem<'_>,
    max_iter: usize,
    tol: f64,
) -> Result<(Array1<f64>, StepReport)> {
    let p = problem.dictionary.n_atoms();
    if problem.gram.dim() != (p, p)
        || problem.x.len() != problem.dictionary.n_features()
        || problem.reference.len() != p
    {
        return Err(Error::invalid("single-sample coding: inconsistent shapes"));
    }
    let smooth = SingleSmooth::new(problem);
    let composite = |a: &Array2<f64>| smooth.value(a) + problem.lambda * l1_norm(a.view());
    let start = smooth.reference.clone();
    let initial = composite(&start);
    let gram_top = crate::linalg::top_eigenvalue_psd(p, crate::linalg::POWER_ITERATIONS, |v| smooth.gram.dot(&v));
    let lipschitz = 2.0 * (gram_top + problem.beta);
    if lipschitz == 0.0 {
        let report = StepReport {
            iterations_used: 0,
            initial_objective: initial,
            final_objective: initial,
            converged: true,
        };
        return Ok((start.index_axis_move(Axis(1), 0), report));
    }
    let settings = FistaSettings {
        step: 1.0 / (LIPSCHITZ_SAFETY * lipschitz),
        l1: problem.lambda,
        max_iter,
        tol,
        stage: "test-sample coding",
    };
    let outcome = fista_l1(&smooth, start, &settings)?;
    let report = StepReport {
        iterations_used: outcome.iterations,
        initial_objective: initial,
        final_objective: composite(&outcome.x),
        converged: outcome.converged,
    };
    Ok((outcome.x.index_axis_move(Axis(1), 0), report))
}
