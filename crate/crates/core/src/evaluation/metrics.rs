//! Precision-recall curves and their step-interpolated area.
//!
//! Scores are sorted in descending order and tied scores form a single
//! threshold step. The area is `Σ (R_i - R_{i-1}) P_i` over steps, with
//! `R_0 = 0` and no extrapolation of precision towards recall 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
    pub true_positives: usize,
    pub predicted_positive: usize,
}

/// One point per distinct score threshold at which at least one positive
/// has been recalled; recall rises to exactly 1 at the last point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub positives: usize,
}

pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<PrCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut pos = 0;
    while pos < order.len() {
        let threshold = scores[order[pos]];
        while pos < order.len() && scores[order[pos]] == threshold {
            tp += usize::from(labels[order[pos]] == 1);
            seen += 1;
            pos += 1;
        }
        if tp > 0 {
            points.push(PrPoint {
                threshold,
                recall: tp as f64 / positives as f64,
                precision: tp as f64 / seen as f64,
                true_positives: tp,
                predicted_positive: seen,
            });
        }
    }
    Ok(PrCurve { points, positives })
}

impl PrCurve {
    /// Step-interpolated area (average precision).
    pub fn area(&self) -> f64 {
        // Steps at precision 1 are summed as integers so that a perfect
        // ranking gives exactly 1 and a single step gives exactly P.
        let mut exact_hits = 0usize;
        let mut partial = 0.0;
        let mut prev_tp = 0usize;
        for p in &self.points {
            let gained = p.true_positives - prev_tp;
            prev_tp = p.true_positives;
            if gained == 0 {
                continue;
            }
            if p.true_positives == p.predicted_positive {
                exact_hits += gained;
            } else {
                partial += (gained as f64 / self.positives as f64) * p.precision;
            }
        }
        exact_hits as f64 / self.positives as f64 + partial
    }
}

/// Area under the precision-recall curve, in `[0, 1]`.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(pr_curve(scores, labels)?.area())
}
