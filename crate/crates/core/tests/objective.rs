mod common;

use common::*;
use ndarray::prelude::*;
use proptest::prelude::*;
use ssdl::model::{objective_terms, ZeroLaplacian};
use ssdl::{
    build_sample_graph, learn_feature_graph, objective_value, Dataset, Dictionary, Hyperparameters, LinearClassifier,
    SparseCodes,
};

/// Term-by-term recomputation with explicit loops.
#[allow(clippy::too_many_arguments)]
fn loop_objective(
    x: &Array2<f64>,
    y: &Array2<f64>,
    d: &Array2<f64>,
    a: &Array2<f64>,
    w: &Array2<f64>,
    l_a: &Array2<f64>,
    l_d: &Array2<f64>,
    hp: &Hyperparameters,
) -> f64 {
    let (n, p) = d.dim();
    let big_n = a.ncols();
    let c = w.nrows();
    let n_train = y.ncols();
    let mut recon = 0.0;
    for i in 0..n {
        for s in 0..big_n {
            let mut v = x[[i, s]];
            for k in 0..p {
                v -= d[[i, k]] * a[[k, s]];
            }
            recon += v * v;
        }
    }
    let l1: f64 = a.iter().map(|v| v.abs()).sum();
    let mut atoms = 0.0;
    for k in 0..p {
        for i in 0..n {
            for j in 0..n {
                atoms += d[[i, k]] * l_d[[i, j]] * d[[j, k]];
            }
        }
    }
    let mut codes = 0.0;
    for k in 0..p {
        for s in 0..big_n {
            for t in 0..big_n {
                codes += a[[k, s]] * l_a[[s, t]] * a[[k, t]];
            }
        }
    }
    let mut class = 0.0;
    for r in 0..c {
        for s in 0..n_train {
            let mut v = y[[r, s]];
            for k in 0..p {
                v -= w[[r, k]] * a[[k, s]];
            }
            class += v * v;
        }
    }
    let ridge: f64 = w.iter().map(|v| v * v).sum();
    recon + hp.lambda * l1 + hp.alpha * atoms + hp.beta * codes + hp.gamma * class + hp.mu * ridge
}

#[test]
fn scalar_example_is_three() {
    let ds = Dataset::new(array![[1.0]], 0, Array2::zeros((2, 0))).unwrap();
    let d = Dictionary::new(array![[1.0]]).unwrap();
    let a = SparseCodes::new(array![[2.0]], 0).unwrap();
    let w = LinearClassifier::zeros(2, 1);
    let hp = Hyperparameters {
        lambda: 1.0,
        gamma: 0.0,
        mu: 0.0,
        alpha: 0.0,
        beta: 0.0,
        ..Hyperparameters::default()
    };
    let v = objective_value(&ds, &d, &a, &w, &ZeroLaplacian(1), array![[0.0]].view(), &hp).unwrap();
    assert_eq!(v, 3.0);
}

#[test]
fn zero_state_has_zero_objective() {
    let ds = Dataset::new(Array2::zeros((3, 4)), 0, Array2::zeros((2, 0))).unwrap();
    let d = Dictionary::normalized(normal(3, 2, &mut rng(0))).unwrap();
    let a = SparseCodes::zeros(2, &ds);
    let w = LinearClassifier::zeros(2, 2);
    let l_a = build_sample_graph(uniform(2, 4, &mut rng(1)).view(), 2)
        .unwrap()
        .into_l_a();
    let v = objective_value(
        &ds,
        &d,
        &a,
        &w,
        &l_a,
        Array2::zeros((3, 3)).view(),
        &Hyperparameters::default(),
    )
    .unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn random_instance_matches_loop_recomputation() {
    let mut r = rng(42);
    let x = uniform(3, 4, &mut r);
    let ds = Dataset::from_labels(x.clone(), &[1, 0], 2).unwrap();
    let d = Dictionary::normalized(normal(3, 2, &mut r)).unwrap();
    let a = normal(2, 4, &mut r);
    let w = normal(2, 2, &mut r);
    let l_a = build_sample_graph(x.view(), 2).unwrap().into_l_a();
    let l_d = learn_feature_graph(x.view(), 2.0, 500, 1e-9).unwrap().into_laplacian();
    let hp = Hyperparameters::default();
    let got = objective_value(
        &ds,
        &d,
        &SparseCodes::new(a.clone(), 2).unwrap(),
        &LinearClassifier::new(w.clone()).unwrap(),
        &l_a,
        l_d.view(),
        &hp,
    )
    .unwrap();
    let want = loop_objective(
        &x,
        &ds.y_train().to_owned(),
        &d.atoms().to_owned(),
        &a,
        &w,
        &l_a,
        &l_d,
        &hp,
    );
    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn dimension_mismatch_is_an_error() {
    let ds = Dataset::new(Array2::zeros((3, 4)), 0, Array2::zeros((2, 0))).unwrap();
    let d = Dictionary::new(Array2::eye(3)).unwrap();
    let a = Array2::zeros((3, 4));
    let w = Array2::zeros((2, 3));
    assert!(objective_terms(
        ds.x(),
        ds.y_train(),
        d.atoms(),
        a.view(),
        w.view(),
        &ZeroLaplacian(5),
        Array2::zeros((3, 3)).view()
    )
    .is_err());
    assert!(objective_terms(
        ds.x(),
        ds.y_train(),
        d.atoms(),
        a.view(),
        w.view(),
        &ZeroLaplacian(4),
        Array2::zeros((2, 2)).view()
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_is_non_negative(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let x = uniform(4, 7, &mut r);
        let ds = Dataset::from_labels(x.clone(), &[0, 1, 1], 2).unwrap();
        let d = Dictionary::normalized(normal(4, 3, &mut r)).unwrap();
        let a = SparseCodes::new(normal(3, 7, &mut r), 3).unwrap();
        let w = LinearClassifier::new(normal(2, 3, &mut r)).unwrap();
        let l_a = build_sample_graph(x.view(), 3).unwrap();
        let l_d = learn_feature_graph(x.view(), 1.0, 300, 1e-9).unwrap().into_laplacian();
        let v = objective_value(&ds, &d, &a, &w, &l_a, l_d.view(), &Hyperparameters::default()).unwrap();
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn without_regularisers_only_reconstruction_remains(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let x = uniform(4, 5, &mut r);
        let ds = Dataset::from_labels(x.clone(), &[0, 1], 2).unwrap();
        let d = Dictionary::normalized(normal(4, 3, &mut r)).unwrap();
        let a = SparseCodes::new(normal(3, 5, &mut r), 2).unwrap();
        let w = LinearClassifier::new(normal(2, 3, &mut r)).unwrap();
        let l_a = build_sample_graph(x.view(), 2).unwrap();
        let l_d = learn_feature_graph(x.view(), 1.0, 300, 1e-9).unwrap().into_laplacian();
        let hp = Hyperparameters { lambda: 0.0, gamma: 0.0, mu: 0.0, alpha: 0.0, beta: 0.0, ..Hyperparameters::default() };
        let v = objective_value(&ds, &d, &a, &w, &l_a, l_d.view(), &hp).unwrap();
        let residual = &x - &d.atoms().dot(&a.matrix());
        prop_assert_eq!(v, residual.iter().map(|e| e * e).sum::<f64>());
    }
}
