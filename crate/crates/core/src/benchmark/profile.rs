//! Dolan-More performance profiles over a task × method quality matrix.
//!
//! For method `i`, `p_i(β)` is the fraction of tasks on which `q_ti` is at
//! least `max_j q_tj / β`, i.e. within a factor `β` of the best method on
//! that task. Qualities are clamped below at [`EPSILON`] so a method that
//! scores zero still reaches 1 for large enough `β`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPSILON: f64 = 1e-9;
pub const DEFAULT_BETA_POINTS: usize = 200;

/// `q_ti` per task (row) and method (column); `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMatrix {
    pub tasks: Vec<String>,
    pub methods: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl QualityMatrix {
    pub fn new(tasks: Vec<String>, methods: Vec<String>) -> Self {
        let values = vec![vec![None; methods.len()]; tasks.len()];
        Self {
            tasks,
            methods,
            values,
        }
    }

    pub fn from_rows(methods: Vec<String>, rows: Vec<(String, Vec<Option<f64>>)>) -> Result<Self> {
        let (tasks, values): (Vec<String>, Vec<Vec<Option<f64>>>) = rows.into_iter().unzip();
        let q = Self {
            tasks,
            methods,
            values,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn set(&mut self, task: usize, method: usize, value: Option<f64>) {
        self.values[task][method] = value;
    }

    pub fn get(&self, task: usize, method: usize) -> Option<f64> {
        self.values[task][method]
    }

    pub fn validate(&self) -> Result<()> {
        for (t, row) in self.values.iter().enumerate() {
            if row.len() != self.methods.len() {
                return Err(Error::Config(format!("row {t} has {} cells", row.len())));
            }
            for v in row.iter().flatten() {
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::Config(format!("quality {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Rows with every method present, clamped at [`EPSILON`]; plus the
    /// number of rows dropped for missing cells.
    pub fn complete_rows(&self) -> (Vec<Vec<f64>>, usize) {
        let mut kept = Vec::new();
        let mut dropped = 0;
        for row in &self.values {
            if row.iter().all(Option::is_some) {
                kept.push(row.iter().map(|v| v.unwrap().max(EPSILON)).collect());
            } else {
                dropped += 1;
            }
        }
        (kept, dropped)
    }

    /// Restricts the matrix to the named methods, in the given order.
    pub fn select(&self, methods: &[&str]) -> Result<Self> {
        let cols: Vec<usize> = methods
            .iter()
            .map(|m| {
                self.methods
                    .iter()
                    .position(|x| x == m)
                    .ok_or_else(|| Error::Config(format!("no method named {m:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            tasks: self.tasks.clone(),
            methods: methods.iter().map(|m| m.to_string()).collect(),
            values: self
                .values
                .iter()
                .map(|row| cols.iter().map(|&c| row[c]).collect())
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DolanMoreCurve {
    pub method: String,
    pub betas: Vec<f64>,
    pub p: Vec<f64>,
}

impl DolanMoreCurve {
    pub fn at(&self, beta: f64) -> Option<f64> {
        self.betas
            .iter()
            .position(|&b| b == beta)
            .map(|i| self.p[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub curves: Vec<DolanMoreCurve>,
    pub retained_rows: usize,
    pub dropped_rows: usize,
}

impl Profile {
    pub fn curve(&self, method: &str) -> Option<&DolanMoreCurve> {
        self.curves.iter().find(|c| c.method == method)
    }
}

pub fn dolan_more(q: &QualityMatrix, betas: &[f64]) -> Result<Profile> {
    q.validate()?;
    if betas.is_empty() || betas.iter().any(|b| !(*b >= 1.0 && b.is_finite())) {
        return Err(Error::Config("betas must be finite and at least 1".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("betas must be ascending".into()));
    }
    let (rows, dropped) = q.complete_rows();
    if rows.is_empty() {
        return Err(Error::NoComparableRows);
    }
    let row_max: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().copied().fold(0.0, f64::max))
        .collect();
    let t = rows.len() as f64;
    let curves = q
        .methods
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let p = betas
                .iter()
                .map(|&beta| {
                    let hits = rows
                        .iter()
                        .zip(&row_max)
                        .filter(|(row, &best)| row[i] >= best / beta)
                        .count();
                    hits as f64 / t
                })
                .collect();
            DolanMoreCurve {
                method: name.clone(),
                betas: betas.to_vec(),
                p,
            }
        })
        .collect();
    Ok(Profile {
        curves,
        retained_rows: rows.len(),
        dropped_rows: dropped,
    })
}

/// Largest best-to-worst ratio over complete rows, nudged up by a relative
/// 1e-12 so that `q >= max / β_max` holds despite rounding.
pub fn beta_max(q: &QualityMatrix) -> Result<f64> {
    let (rows, _) = q.complete_rows();
    if rows.is_empty() {
        return Err(Error::NoComparableRows);
    }
    let ratio = rows
        .iter()
        .map(|r| {
            let hi = r.iter().copied().fold(0.0, f64::max);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo
        })
        .fold(1.0, f64::max);
    Ok(ratio * (1.0 + 1e-12))
}

/// `points` values log-spaced on `[1, β_max]`.
pub fn default_beta_grid(q: &QualityMatrix, points: usize) -> Result<Vec<f64>> {
    let top = beta_max(q)?;
    Ok(log_grid(top, points))
}

pub fn log_grid(top: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let span = top.ln();
    let mut grid: Vec<f64> = (0..points)
        .map(|k| (span * k as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = 1.0;
    grid[points - 1] = top;
    grid
}
