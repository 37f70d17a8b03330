//! Shared helpers for the integration tests: random datasets and
//! brute-force reference implementations.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebalance::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly imbalanced dataset; with `grid` the features are small
/// integers so that distance ties are common.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_major: usize, grid: bool) -> Dataset {
    let d = rng.random_range(1..=5);
    let major = rng.random_range(3..=max_major);
    let minor = rng.random_range(2..major);
    let n = major + minor;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= major)).collect();
    // interleave the classes
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let features = (0..n * d)
        .map(|_| {
            if grid {
                f64::from(rng.random_range(0..4u8))
            } else {
                rng.random_range(-5.0..5.0)
            }
        })
        .collect();
    Dataset::new(features, d, labels).unwrap()
}

/// Multiplier drawn from `(1, IR]`.
pub fn random_multiplier(rng: &mut ChaCha8Rng, ir: f64) -> f64 {
    let u: f64 = rng.random_range(0.0..1.0);
    ir - u * (ir - 1.0)
}

/// Step-interpolated PR-AUC by enumerating every distinct score as a
/// threshold and recounting from scratch.
pub fn pr_auc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let positives = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if *l == 1 {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}
