//! Synthetic Gaussian blobs for tests, examples and smoke runs.

use ndarray::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::Dataset;

/// Isotropic Gaussian clusters with centres drawn uniformly in
/// `[0.2, 0.8]^n`, samples clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub n_features: usize,
    pub n_classes: usize,
    /// Standard deviation of each cluster.
    pub spread: f64,
    pub seed: u64,
}

impl Blobs {
    /// Draws `count` samples with round-robin labels, then shuffles them.
    pub fn sample(&self, count: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let centers = Array2::from_shape_fn((self.n_features, self.n_classes), |_| rng.random_range(0.2..0.8));
        let mut labels: Vec<usize> = (0..count).map(|i| i % self.n_classes).collect();
        labels.shuffle(&mut rng);
        let x = Array2::from_shape_fn((self.n_features, count), |(i, j)| {
            let noise: f64 = rng.sample(StandardNormal);
            (centers[[i, labels[j]]] + self.spread * noise).clamp(0.0, 1.0)
        });
        (x, labels)
    }

    /// A dataset whose first `n_train` samples are labelled with balanced
    /// classes; test labels are attached.
    pub fn dataset(&self, n_train: usize, n_test: usize) -> Result<Dataset> {
        let (x, labels) = self.sample(n_train + n_test);
        // Round-robin before shuffling keeps the classes balanced overall;
        // rebalance the labelled prefix explicitly.
        let mut order: Vec<usize> = Vec::with_capacity(labels.len());
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes];
        for (j, &l) in labels.iter().enumerate() {
            per_class[l].push(j);
        }
        let mut cursors = vec![0usize; self.n_classes];
        let mut class = 0;
        while order.len() < n_train {
            if let Some(&j) = per_class[class].get(cursors[class]) {
                order.push(j);
                cursors[class] += 1;
            }
            class = (class + 1) % self.n_classes;
        }
        let chosen: std::collections::HashSet<usize> = order.iter().copied().collect();
        order.extend((0..labels.len()).filter(|j| !chosen.contains(j)));
        let x = x.select(Axis(1), &order);
        let train: Vec<usize> = order[..n_train].iter().map(|&j| labels[j]).collect();
        let test: Vec<usize> = order[n_train..].iter().map(|&j| labels[j]).collect();
        Dataset::from_labels(x, &train, self.n_classes)?.with_test_labels(test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labelled_prefix_is_balanced() {
        let blobs = Blobs {
            n_features: 4,
            n_classes: 3,
            spread: 0.1,
            seed: 9,
        };
        let ds = blobs.dataset(9, 30).unwrap();
        let mut counts = [0; 3];
        for l in ds.train_labels() {
            counts[l] += 1;
        }
        assert_eq!(counts, [3, 3, 3]);
        assert_eq!(ds.n_test(), 30);
        assert!(ds.x().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn same_seed_same_data() {
        let blobs = Blobs {
            n_features: 4,
            n_classes: 3,
            spread: 0.1,
            seed: 9,
        };
        assert_eq!(blobs.dataset(6, 6).unwrap(), blobs.dataset(6, 6).unwrap());
    }
}
