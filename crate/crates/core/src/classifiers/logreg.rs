//! L1-regularised logistic regression fitted by proximal gradient descent.
//!
//! Objective on standardised features:
//!
//! ```text
//! F(w, b) = (1/n) Σ [softplus(z_i) - y_i z_i] + λ ‖w‖₁,   z_i = w·x_i + b
//! ```
//!
//! The bias is unpenalised. Each iteration takes a gradient step on the
//! smooth part, soft-thresholds the weights, and halves the step until the
//! quadratic upper bound holds. An accepted step never increases `F`.

use crate::dataset::Dataset;

pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop once an iteration decreases the objective by less than this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    /// Objective at the start and after every accepted step.
    pub objectives: Vec<f64>,
    pub converged: bool,
}

/// Per-feature centring and scaling. Zero-variance features map to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.n_features();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for row in data.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.mean[j]) * self.inv_std[j];
        }
    }

    pub fn transform(&self, data: &Dataset) -> Vec<f64> {
        let d = data.n_features();
        let mut out = vec![0.0; data.len() * d];
        for (row, dst) in data.rows().zip(out.chunks_exact_mut(d)) {
            self.transform_row(row, dst);
        }
        out
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn smooth_loss(w: &[f64], b: f64, x: &[f64], y: &[u8]) -> f64 {
    let d = w.len();
    let total: f64 = x
        .chunks_exact(d)
        .zip(y)
        .map(|(row, &yi)| {
            let z = dot(w, row) + b;
            softplus(z) - f64::from(yi) * z
        })
        .sum();
    total / y.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// Smooth loss and its gradient `(∂/∂w, ∂/∂b)` packed as `d + 1` values.
fn smooth_loss_and_gradient(w: &[f64], b: f64, x: &[f64], y: &[u8]) -> (f64, Vec<f64>) {
    let d = w.len();
    let n = y.len() as f64;
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let z = dot(w, row) + b;
        loss += if yi == 1 { softplus(-z) } else { softplus(z) };
        let r = sigmoid(z) - f64::from(yi);
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

/// `(objective, gradient)` on an already standardised row-major matrix
/// `x` (n × d). The objective includes `lambda ‖w‖₁`; the gradient covers
/// the smooth part only and has `d + 1` entries, the bias last.
pub fn logreg_objective_and_gradient(
    w: &[f64],
    b: f64,
    lambda: f64,
    x: &[f64],
    y: &[u8],
) -> (f64, Vec<f64>) {
    let (loss, grad) = smooth_loss_and_gradient(w, b, x, y);
    (loss + lambda * l1(w), grad)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Proximal gradient with backtracking from `(w0, b0)`.
pub fn solve(
    x: &[f64],
    y: &[u8],
    lambda: f64,
    w0: Vec<f64>,
    b0: f64,
    opts: &SolverOptions,
) -> (Vec<f64>, f64, SolveTrace) {
    let d = w0.len();
    let mut w = w0;
    let mut b = b0;
    let mut step = 1.0;
    let (mut loss, mut grad) = smooth_loss_and_gradient(&w, b, x, y);
    let mut objective = loss + lambda * l1(&w);
    let mut objectives = vec![objective];
    let mut converged = false;
    let mut w_new = vec![0.0; d];

    for _ in 0..opts.max_iter {
        let mut accepted = None;
        while step > 1e-20 {
            for j in 0..d {
                w_new[j] = soft_threshold(w[j] - step * grad[j], step * lambda);
            }
            let b_new = b - step * grad[d];
            let new_loss = smooth_loss(&w_new, b_new, x, y);
            let mut lin = grad[d] * (b_new - b);
            let mut sq = (b_new - b) * (b_new - b);
            for j in 0..d {
                let delta = w_new[j] - w[j];
                lin += grad[j] * delta;
                sq += delta * delta;
            }
            if new_loss <= loss + lin + sq / (2.0 * step) {
                accepted = Some(b_new);
                break;
            }
            step *= 0.5;
        }
        let Some(b_new) = accepted else {
            converged = true;
            break;
        };
        let new_objective = smooth_loss(&w_new, b_new, x, y) + lambda * l1(&w_new);
        if new_objective > objective {
            // Rounding can defeat the bound at the optimum; stop here.
            converged = true;
            break;
        }
        std::mem::swap(&mut w, &mut w_new);
        b = b_new;
        let decrease = objective - new_objective;
        objective = new_objective;
        objectives.push(objective);
        if decrease < opts.tol {
            converged = true;
            break;
        }
        (loss, grad) = smooth_loss_and_gradient(&w, b, x, y);
        // Let the step grow back slowly after backtracking.
        step = (step * 1.5).min(1e6);
    }
    (
        w,
        b,
        SolveTrace {
            objectives,
            converged,
        },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    standardizer: Standardizer,
}

impl LogRegModel {
    pub fn fit(data: &Dataset, lambda: f64, opts: &SolverOptions) -> (Self, SolveTrace) {
        let standardizer = Standardizer::fit(data);
        let x = standardizer.transform(data);
        Self::fit_standardized(standardizer, &x, data.labels(), lambda, None, opts)
    }

    /// Fits on a pre-standardised matrix, optionally warm-started.
    pub(crate) fn fit_standardized(
        standardizer: Standardizer,
        x: &[f64],
        y: &[u8],
        lambda: f64,
        warm: Option<(&[f64], f64)>,
        opts: &SolverOptions,
    ) -> (Self, SolveTrace) {
        let d = standardizer.mean.len();
        let (w0, b0) = match warm {
            Some((w, b)) => (w.to_vec(), b),
            None => (vec![0.0; d], 0.0),
        };
        let (weights, bias, trace) = solve(x, y, lambda, w0, b0, opts);
        (
            Self {
                weights,
                bias,
                lambda,
                standardizer,
            },
            trace,
        )
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        let mut z = self.bias;
        for (j, w) in self.weights.iter().enumerate() {
            z += w * (x[j] - self.standardizer.mean[j]) * self.standardizer.inv_std[j];
        }
        z
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }
}
