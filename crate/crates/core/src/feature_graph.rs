//! Learning a feature-graph Laplacian from data.
//!
//! The Laplacian `L_D` minimises `tr(Xᵀ L X) + θ ||L||²_F` over symmetric
//! matrices with zero row sums, non-positive off-diagonal entries and
//! `tr(L) = n`. Writing `L` through its edge weights `w_e = -L[i,j]` (`i < j`)
//! makes symmetry and zero row sums structural, and the problem becomes
//!
//! ```text
//! minimise  Σ_e w_e z_e + θ (Σ_i deg_i² + 2 Σ_e w_e²)
//! subject to w ≥ 0,  Σ_e w_e = n / 2
//! ```
//!
//! where `z_e = ||X[i,:] - X[j,:]||²` and `deg_i = Σ_{e ∋ i} w_e`. This is a
//! strongly convex quadratic over a scaled simplex, solved here by
//! accelerated projected gradient with exact Euclidean projection.

use std::cmp::Ordering;

use ndarray::prelude::*;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Learned feature graph: edge weights and the dense Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    n: usize,
    weights: Array1<f64>,
    laplacian: Array2<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

impl FeatureGraph {
    /// Builds the Laplacian from edge weights in [`edge_pairs`] order.
    pub fn from_weights(n: usize, weights: Array1<f64>) -> Result<Self> {
        if weights.len() != edge_count(n) {
            return Err(Error::invalid(format!(
                "feature graph on {n} nodes needs {} weights, got {}",
                edge_count(n),
                weights.len()
            )));
        }
        let mut laplacian = Array2::zeros((n, n));
        for ((i, j), &w) in edge_pairs(n).zip(weights.iter()) {
            laplacian[[i, j]] = -w;
            laplacian[[j, i]] = -w;
        }
        for i in 0..n {
            let degree: f64 = (0..n).filter(|&j| j != i).map(|j| -laplacian[[i, j]]).sum();
            laplacian[[i, i]] = degree;
        }
        Ok(Self {
            n,
            weights,
            laplacian,
            objective: f64::NAN,
            iterations: 0,
            converged: false,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn laplacian(&self) -> ArrayView2<'_, f64> {
        self.laplacian.view()
    }

    pub fn into_laplacian(self) -> Array2<f64> {
        self.laplacian
    }

    /// Edge weights, ordered as [`edge_pairs`].
    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    /// Objective value reached by the solver (`NaN` for graphs built from
    /// explicit weights).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}

pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Unordered pairs `(i, j)`, `i < j`, in row-major order.
pub fn edge_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Squared distances between feature rows, one per edge.
fn edge_distances(x: ArrayView2<f64>) -> Array1<f64> {
    let n = x.nrows();
    let x = x.as_standard_layout();
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (i + 1..n)
                .map(|j| xi.iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect()
        })
        .collect();
    per_row.into_iter().flatten().collect()
}

/// Euclidean projection onto `{w ≥ 0, Σ w = radius}` by the sort-based
/// algorithm.
pub fn project_simplex(v: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    assert!(radius > 0.0, "simplex radius must be positive");
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.mapv(|x| (x - tau).max(0.0))
}

struct EdgeProblem {
    n: usize,
    z: Array1<f64>,
    theta: f64,
}

impl EdgeProblem {
    fn degrees(&self, w: &Array1<f64>) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for ((i, j), &we) in edge_pairs(self.n).zip(w.iter()) {
            deg[i] += we;
            deg[j] += we;
        }
        deg
    }

    fn value(&self, w: &Array1<f64>) -> f64 {
        let deg = self.degrees(w);
        let smooth = self.z.dot(w);
        let deg_sq: f64 = deg.iter().map(|d| d * d).sum();
        smooth + self.theta * (deg_sq + 2.0 * w.dot(w))
    }

    fn gradient(&self, w: &Array1<f64>) -> Array1<f64> {
        let deg = self.degrees(w);
        let mut g = self.z.clone();
        for (((i, j), ge), &we) in edge_pairs(self.n).zip(g.iter_mut()).zip(w.iter()) {
            *ge += self.theta * (2.0 * (deg[i] + deg[j]) + 4.0 * we);
        }
        g
    }
}

/// Learns `L_D` from the rows (features) of `x`.
///
/// Starts from the uniform feasible point and stops after `iters` gradient
/// evaluations or once the relative objective decrease of an accepted step
/// falls below `tol`. The returned point is the best one visited.
pub fn learn_feature_graph(x: ArrayView2<f64>, theta: f64, iters: usize, tol: f64) -> Result<FeatureGraph> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("feature graph needs n >= 2, got {n}")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be finite and >= 0, got {theta}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature matrix contains non-finite values"));
    }
    let radius = n as f64 / 2.0;
    let problem = EdgeProblem {
        n,
        z: edge_distances(x),
        theta,
    };
    let edges = problem.z.len();

    if theta == 0.0 {
        // Linear objective: any split of the mass over the closest pairs is
        // optimal; spread it evenly.
        let best = problem.z.iter().cloned().fold(f64::INFINITY, f64::min);
        let ties = problem.z.iter().filter(|&&z| z == best).count();
        let w = problem.z.mapv(|z| if z == best { radius / ties as f64 } else { 0.0 });
        let objective = problem.value(&w);
        let mut graph = FeatureGraph::from_weights(n, w)?;
        graph.objective = objective;
        graph.converged = true;
        return Ok(graph);
    }

    // Hessian is 2θ(SᵀS + 2I) with S the unsigned incidence matrix, and
    // λ_max(SᵀS) = 2n - 2.
    let step = 1.0 / (4.0 * theta * n as f64);
    let mut current = Array1::from_elem(edges, radius / edges as f64);
    let mut current_value = problem.value(&current);
    let mut extrapolated = current.clone();
    let mut momentum = 1.0_f64;
    let mut converged = false;
    let mut used = 0;

    for it in 1..=iters {
        used = it;
        let grad = problem.gradient(&extrapolated);
        let candidate = project_simplex((&extrapolated - &(grad * step)).view(), radius);
        let candidate_value = problem.value(&candidate);
        if !candidate_value.is_finite() {
            return Err(Error::Divergence {
                stage: "feature graph",
                step,
            });
        }
        if candidate_value > current_value {
            if momentum > 1.0 {
                extrapolated.assign(&current);
                momentum = 1.0;
                continue;
            }
            if candidate_value > current_value + 1e-14 * current_value.abs().max(1.0) || candidate == current {
                converged = true;
                break;
            }
        }
        let decrease = (current_value - candidate_value) / current_value.abs().max(f64::MIN_POSITIVE);
        let previous = std::mem::replace(&mut current, candidate);
        current_value = candidate_value;
        let next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        extrapolated = &current + &((&current - &previous) * ((momentum - 1.0) / next));
        momentum = next;
        if tol > 0.0 && decrease < tol {
            converged = true;
            break;
        }
    }

    let mut graph = FeatureGraph::from_weights(n, current)?;
    graph.objective = current_value;
    graph.iterations = used;
    graph.converged = converged;
    Ok(graph)
}

/// `tr(Xᵀ L X) + θ ||L||²_F` for a dense `L`.
pub fn graph_objective(x: ArrayView2<f64>, laplacian: ArrayView2<f64>, theta: f64) -> f64 {
    let lx = laplacian.dot(&x);
    let smooth: f64 = lx.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    smooth + theta * laplacian.iter().map(|v| v * v).sum::<f64>()
}
