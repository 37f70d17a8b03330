//! Brute-force k-nearest-neighbour scorer.
//!
//! A query costs O(n·d) distance evaluations plus a partial sort, so
//! scoring a validation set against a training set is O(n²·d). That is
//! fine for datasets of a few thousand rows and avoids an index.

use crate::dataset::{squared_distance, Dataset};

#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    features: Vec<f64>,
    labels: Vec<u8>,
    n_features: usize,
    k: usize,
}

impl KnnModel {
    pub fn fit(data: &Dataset, k: usize) -> Self {
        Self {
            features: data.features().to_vec(),
            labels: data.labels().to_vec(),
            n_features: data.n_features(),
            k: k.max(1),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Labels of the `k` nearest training rows, nearest first; equal
    /// distances resolve to the lower training index.
    pub fn neighbor_labels(&self, x: &[f64], k: usize) -> Vec<u8> {
        let n = self.labels.len();
        let k = k.min(n);
        let mut cand: Vec<(f64, usize)> = self
            .features
            .chunks_exact(self.n_features)
            .enumerate()
            .map(|(i, row)| (squared_distance(row, x), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            cand.select_nth_unstable_by(k, order);
            cand.truncate(k);
        }
        cand.sort_unstable_by(order);
        cand.into_iter().map(|(_, i)| self.labels[i]).collect()
    }

    /// Fraction of minor labels among the `k` nearest training rows.
    pub fn score(&self, x: &[f64]) -> f64 {
        minor_fraction(&self.neighbor_labels(x, self.k), self.k)
    }
}

/// Fraction of ones among the first `min(k, len)` labels.
pub fn minor_fraction(nearest: &[u8], k: usize) -> f64 {
    let k = k.min(nearest.len());
    let ones = nearest[..k].iter().filter(|&&l| l == 1).count();
    ones as f64 / k as f64
}
