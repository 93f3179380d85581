//! Domain types, hyperparameters and the joint objective.
//!
//! The objective minimised by both training methods is
//!
//! ```text
//! ||X - D A||²_F + λ ||A||₁ + α tr(Dᵀ L_D D) + β tr(A L_A Aᵀ)
//!     + γ ||Y_train - W A_train||²_F + μ ||W||²_F
//! ```
//!
//! with `D` restricted to unit-norm columns. [`objective_value`] evaluates it
//! directly from its inputs and is used as the reference for every descent
//! check in the crate.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, frobenius_sq, l1_norm, top_eigenvalue_psd, POWER_ITERATIONS};

/// Tolerance on atom norms for membership in the unit-column constraint set.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Feature matrix with a labelled prefix and an unlabelled suffix.
///
/// Columns `0..n_train` are labelled and carry one-hot targets in
/// `y_train`. Ground-truth labels for the unlabelled block may be attached
/// for evaluation; training never reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    n_train: usize,
    y_train: Array2<f64>,
    test_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, n_train: usize, y_train: Array2<f64>) -> Result<Self> {
        let (n, total) = x.dim();
        if n == 0 || total == 0 {
            return Err(Error::invalid(format!("dataset must be non-empty, got {n}x{total}")));
        }
        if n_train > total {
            return Err(Error::invalid(format!(
                "n_train = {n_train} exceeds sample count {total}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        let c = y_train.nrows();
        if c < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {c}")));
        }
        if y_train.ncols() != n_train {
            return Err(Error::invalid(format!(
                "label matrix has {} columns, expected n_train = {n_train}",
                y_train.ncols()
            )));
        }
        for (j, col) in y_train.columns().into_iter().enumerate() {
            let ones = col.iter().filter(|&&v| v == 1.0).count();
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != c {
                return Err(Error::invalid(format!("label column {j} is not one-hot")));
            }
        }
        Ok(Self {
            x,
            n_train,
            y_train,
            test_labels: None,
        })
    }

    /// Builds the one-hot matrix from integer labels of the labelled prefix.
    pub fn from_labels(x: Array2<f64>, train_labels: &[usize], n_classes: usize) -> Result<Self> {
        let y = one_hot(train_labels, n_classes)?;
        Self::new(x, train_labels.len(), y)
    }

    /// Attaches ground-truth labels for the unlabelled block.
    pub fn with_test_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_test() {
            return Err(Error::invalid(format!(
                "{} test labels for {} unlabelled samples",
                labels.len(),
                self.n_test()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.n_classes()) {
            return Err(Error::invalid(format!(
                "test label {bad} out of range for {} classes",
                self.n_classes()
            )));
        }
        self.test_labels = Some(labels);
        Ok(self)
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn x_train(&self) -> ArrayView2<'_, f64> {
        self.x.slice(s![.., ..self.n_train])
    }

    pub fn x_test(&self) -> ArrayView2<'_, f64> {
        self.x.slice(s![.., self.n_train..])
    }

    pub fn y_train(&self) -> ArrayView2<'_, f64> {
        self.y_train.view()
    }

    pub fn n_features(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_test(&self) -> usize {
        self.n_samples() - self.n_train
    }

    pub fn n_classes(&self) -> usize {
        self.y_train.nrows()
    }

    /// Integer labels of the labelled block.
    pub fn train_labels(&self) -> Vec<usize> {
        labels_from_one_hot(self.y_train.view())
    }

    pub fn test_labels(&self) -> Option<&[usize]> {
        self.test_labels.as_deref()
    }

    /// The labelled block on its own, with no unlabelled samples.
    pub fn labelled_only(&self) -> Dataset {
        Dataset {
            x: self.x_train().to_owned(),
            n_train: self.n_train,
            y_train: self.y_train.clone(),
            test_labels: Some(Vec::new()),
        }
    }
}

/// One-hot encodes `labels` as a `n_classes × labels.len()` matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Array2<f64>> {
    let mut y = Array2::zeros((n_classes, labels.len()));
    for (j, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::invalid(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        y[[l, j]] = 1.0;
    }
    Ok(y)
}

/// Row index of the maximum of each column (first maximum on ties).
pub fn labels_from_one_hot(y: ArrayView2<f64>) -> Vec<usize> {
    y.columns().into_iter().map(|col| argmax(col)).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Dictionary whose atoms (columns) all have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary(Array2<f64>);

impl Dictionary {
    /// Wraps `atoms`, rejecting any column whose norm is not 1 within
    /// [`UNIT_NORM_TOL`].
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::invalid("dictionary must have at least one atom"));
        }
        for (i, col) in atoms.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::invalid(format!("atom {i} has norm {norm}, expected 1")));
            }
        }
        Ok(Self(atoms))
    }

    /// Rescales every column of `atoms` to unit norm.
    pub fn normalized(mut atoms: Array2<f64>) -> Result<Self> {
        for (i, mut col) in atoms.columns_mut().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::invalid(format!("atom {i} cannot be normalized (norm {norm})")));
            }
            col /= norm;
        }
        Self::new(atoms)
    }

    pub(crate) fn from_projected(atoms: Array2<f64>) -> Self {
        debug_assert!(atoms
            .columns()
            .into_iter()
            .all(|c| (c.dot(&c).sqrt() - 1.0).abs() <= UNIT_NORM_TOL));
        Self(atoms)
    }

    pub fn atoms(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn n_features(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Sparse codes of every sample, `p × N`, column-aligned with a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    codes: Array2<f64>,
    n_train: usize,
}

impl SparseCodes {
    pub fn new(codes: Array2<f64>, n_train: usize) -> Result<Self> {
        if n_train > codes.ncols() {
            return Err(Error::invalid(format!(
                "n_train = {n_train} exceeds {} code columns",
                codes.ncols()
            )));
        }
        if codes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sparse codes contain non-finite values"));
        }
        Ok(Self { codes, n_train })
    }

    pub fn zeros(n_atoms: usize, ds: &Dataset) -> Self {
        Self {
            codes: Array2::zeros((n_atoms, ds.n_samples())),
            n_train: ds.n_train(),
        }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.codes.view()
    }

    pub fn train(&self) -> ArrayView2<'_, f64> {
        self.codes.slice(s![.., ..self.n_train])
    }

    pub fn test(&self) -> ArrayView2<'_, f64> {
        self.codes.slice(s![.., self.n_train..])
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_atoms(&self) -> usize {
        self.codes.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.codes.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.codes
    }
}

/// Linear classifier `W` (`c × p`) acting on sparse codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier(Array2<f64>);

impl LinearClassifier {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("classifier contains non-finite weights"));
        }
        Ok(Self(weights))
    }

    pub fn zeros(n_classes: usize, n_atoms: usize) -> Self {
        Self(Array2::zeros((n_classes, n_atoms)))
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn n_classes(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Model and solver settings. [`Default`] gives the reference MNIST settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// ℓ1 sparsity weight.
    pub lambda: f64,
    /// Classifier loss weight.
    pub gamma: f64,
    /// Classifier ridge weight.
    pub mu: f64,
    /// Atom smoothness weight on the feature graph.
    pub alpha: f64,
    /// Code smoothness weight on the sample graph.
    pub beta: f64,
    /// Ridge weight of the feature-graph learning problem.
    pub theta: f64,
    /// Neighbours per sample in the sample graph.
    pub k: usize,
    /// Number of atoms.
    pub p: usize,
    pub outer_iters: usize,
    pub sc_iters: usize,
    pub du_iters: usize,
    /// Relative objective change below which a loop stops.
    pub tol: f64,
    pub seed: u64,
    /// Iteration budget of the feature-graph solver.
    pub graph_iters: usize,
    pub graph_tol: f64,
    /// Neighbours used by the k-NN classifier on codes.
    pub k_cls: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            gamma: 0.2,
            mu: 0.1,
            alpha: 10.0,
            beta: 0.5,
            theta: 2.0,
            k: 66,
            p: 64,
            outer_iters: 30,
            sc_iters: 200,
            du_iters: 100,
            tol: 1e-5,
            seed: 0,
            graph_iters: 2000,
            graph_tol: 1e-9,
            k_cls: 5,
        }
    }
}

impl Hyperparameters {
    /// Checks signs and budgets; sample-count dependent checks live in
    /// [`Hyperparameters::validate_for`].
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
            ("tol", self.tol),
            ("graph_tol", self.graph_tol),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let counts = [
            ("k", self.k),
            ("p", self.p),
            ("outer_iters", self.outer_iters),
            ("sc_iters", self.sc_iters),
            ("du_iters", self.du_iters),
            ("graph_iters", self.graph_iters),
            ("k_cls", self.k_cls),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, n_samples: usize) -> Result<()> {
        self.validate()?;
        if self.k >= n_samples {
            return Err(Error::invalid(format!(
                "k = {} must be smaller than the sample count {n_samples}",
                self.k
            )));
        }
        Ok(())
    }
}

/// A symmetric positive semidefinite `N × N` operator acting on code
/// matrices from the right.
pub trait LaplacianOperator: Sync {
    fn order(&self) -> usize;

    /// `A · L` for a `p × N` matrix `A`.
    fn right_apply(&self, a: ArrayView2<f64>) -> Array2<f64>;

    /// `tr(A L Aᵀ)`.
    fn quadratic_form(&self, a: ArrayView2<f64>) -> f64 {
        frobenius_dot(self.right_apply(a).view(), a)
    }

    /// Largest eigenvalue, by power iteration.
    fn spectral_radius(&self) -> f64 {
        top_eigenvalue_psd(self.order(), POWER_ITERATIONS, |v| {
            let row = v.insert_axis(Axis(0));
            self.right_apply(row).index_axis_move(Axis(0), 0)
        })
    }
}

impl LaplacianOperator for Array2<f64> {
    fn order(&self) -> usize {
        self.nrows()
    }

    fn right_apply(&self, a: ArrayView2<f64>) -> Array2<f64> {
        a.dot(self)
    }
}

/// The zero operator; used where the code-graph term is switched off.
#[derive(Debug, Clone, Copy)]
pub struct ZeroLaplacian(pub usize);

impl LaplacianOperator for ZeroLaplacian {
    fn order(&self) -> usize {
        self.0
    }

    fn right_apply(&self, a: ArrayView2<f64>) -> Array2<f64> {
        Array2::zeros(a.raw_dim())
    }

    fn quadratic_form(&self, _a: ArrayView2<f64>) -> f64 {
        0.0
    }

    fn spectral_radius(&self) -> f64 {
        0.0
    }
}

/// Unweighted terms of the objective; [`ObjectiveTerms::total`] applies the
/// hyperparameter weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub reconstruction: f64,
    pub l1: f64,
    pub atom_smoothness: f64,
    pub code_smoothness: f64,
    pub classification: f64,
    pub ridge: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, hp: &Hyperparameters) -> f64 {
        self.reconstruction
            + hp.lambda * self.l1
            + hp.alpha * self.atom_smoothness
            + hp.beta * self.code_smoothness
            + hp.gamma * self.classification
            + hp.mu * self.ridge
    }
}

/// Evaluates the objective terms on raw matrices. `d` need not have unit
/// columns, which lets gradient checks perturb it freely.
#[allow(clippy::too_many_arguments)]
pub fn objective_terms<L: LaplacianOperator + ?Sized>(
    x: ArrayView2<f64>,
    y_train: ArrayView2<f64>,
    d: ArrayView2<f64>,
    a: ArrayView2<f64>,
    w: ArrayView2<f64>,
    l_a: &L,
    l_d: ArrayView2<f64>,
) -> Result<ObjectiveTerms> {
    let (n, total) = x.dim();
    let p = d.ncols();
    let n_train = y_train.ncols();
    let c = y_train.nrows();
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("objective: dimension mismatch in {what}")))
        }
    };
    check(d.nrows() == n, "D rows vs X rows")?;
    check(a.dim() == (p, total), "A shape vs (p, N)")?;
    check(w.dim() == (c, p), "W shape vs (c, p)")?;
    check(n_train <= total, "labelled block size")?;
    check(l_a.order() == total, "L_A order vs N")?;
    check(l_d.dim() == (n, n), "L_D shape vs (n, n)")?;

    let residual = &x - &d.dot(&a);
    let class_residual = &y_train - &w.dot(&a.slice(s![.., ..n_train]));
    Ok(ObjectiveTerms {
        reconstruction: frobenius_sq(residual.view()),
        l1: l1_norm(a),
        atom_smoothness: frobenius_dot(l_d.dot(&d).view(), d),
        code_smoothness: l_a.quadratic_form(a),
        classification: frobenius_sq(class_residual.view()),
        ridge: frobenius_sq(w),
    })
}

/// Full objective for a dataset and a model triple.
pub fn objective_value<L: LaplacianOperator + ?Sized>(
    ds: &Dataset,
    d: &Dictionary,
    a: &SparseCodes,
    w: &LinearClassifier,
    l_a: &L,
    l_d: ArrayView2<f64>,
    hp: &Hyperparameters,
) -> Result<f64> {
    let terms = objective_terms(ds.x(), ds.y_train(), d.atoms(), a.matrix(), w.weights(), l_a, l_d)?;
    Ok(terms.total(hp))
}
