//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssdl::synthetic::Blobs;
use ssdl::{Dataset, Hyperparameters};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
}

pub fn normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub fn max_abs(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix, by nalgebra's symmetric
/// eigensolver.
pub fn min_eigenvalue(m: ArrayView2<f64>) -> f64 {
    let dm = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
    dm.symmetric_eigen().eigenvalues.min()
}

/// Affine reconstruction weights from the KKT system of
/// `min wᵀ G w  s.t.  1ᵀw = 1`, with the same Gram regularisation as the
/// library, solved by LU on the bordered matrix.
pub fn lle_kkt_oracle(x: ArrayView1<f64>, neighbors: ArrayView2<f64>) -> Array1<f64> {
    let k = neighbors.ncols();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            g[(a, b)] = (0..x.len())
                .map(|r| (x[r] - neighbors[[r, a]]) * (x[r] - neighbors[[r, b]]))
                .sum();
        }
    }
    let trace = g.trace();
    let eps = if trace > 0.0 { 1e-3 * trace } else { 1e-3 };
    for a in 0..k {
        g[(a, a)] += eps;
    }
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            kkt[(a, b)] = 2.0 * g[(a, b)];
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs).expect("bordered KKT matrix is nonsingular");
    Array1::from_iter(sol.iter().take(k).copied())
}

/// `tr(Xᵀ L X) + θ ||L||²_F` for the Laplacian with off-diagonal weights
/// `w` on the pairs `(0,1), (0,2), (1,2)`, summed entry by entry.
pub fn three_node_objective(x: ArrayView2<f64>, w: [f64; 3], theta: f64) -> f64 {
    let mut l = [[0.0; 3]; 3];
    for (e, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        l[i][j] -= w[e];
        l[j][i] -= w[e];
        l[i][i] += w[e];
        l[j][j] += w[e];
    }
    let mut smooth = 0.0;
    for s in 0..x.ncols() {
        for i in 0..3 {
            for j in 0..3 {
                smooth += x[[i, s]] * l[i][j] * x[[j, s]];
            }
        }
    }
    let frob: f64 = l.iter().flatten().map(|v| v * v).sum();
    smooth + theta * frob
}

/// Best objective over the feasible simplex `w ≥ 0, Σw = 1.5` on a grid of
/// spacing `1e-3`.
pub fn three_node_grid_best(x: ArrayView2<f64>, theta: f64) -> (f64, [f64; 3]) {
    let m = 1500;
    let scale = 1e-3;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let w = [i as f64 * scale, j as f64 * scale, (m - i - j) as f64 * scale];
            let v = three_node_objective(x, w, theta);
            if v < best.0 {
                best = (v, w);
            }
        }
    }
    best
}

/// Three well separated classes in `[0, 1]^10`.
pub fn blobs(seed: u64) -> Blobs {
    Blobs {
        n_features: 10,
        n_classes: 3,
        spread: 0.12,
        seed,
    }
}

pub fn blobs_dataset(seed: u64) -> Dataset {
    blobs(seed).dataset(30, 300).expect("blobs dataset")
}

pub fn blobs_hyperparameters(seed: u64) -> Hyperparameters {
    Hyperparameters {
        k: 10,
        p: 16,
        outer_iters: 15,
        seed,
        ..Hyperparameters::default()
    }
}

/// Small random problem for monotonicity sweeps.
pub fn small_instance(seed: u64) -> (Dataset, Hyperparameters) {
    let mut r = rng(seed);
    let n = r.random_range(2..=10);
    let n_samples = r.random_range(6..=40);
    let c = r.random_range(2..=3);
    let n_train = r.random_range(c..=n_samples / 2);
    let x = uniform(n, n_samples, &mut r);
    let labels: Vec<usize> = (0..n_train).map(|i| i % c).collect();
    let ds = Dataset::from_labels(x, &labels, c).expect("dataset");
    let hp = Hyperparameters {
        lambda: r.random_range(0.01..0.5),
        gamma: r.random_range(0.05..1.0),
        mu: r.random_range(0.05..0.5),
        alpha: r.random_range(0.0..10.0),
        beta: r.random_range(0.0..1.0),
        theta: r.random_range(0.1..3.0),
        k: r.random_range(1..=5.min(n_samples - 1)),
        p: r.random_range(1..=8),
        outer_iters: 8,
        sc_iters: 100,
        du_iters: 50,
        seed,
        ..Hyperparameters::default()
    };
    (ds, hp)
}
