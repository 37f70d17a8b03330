//! Cross-validated PR-AUC of a resample-then-learn pipeline, and the two
//! multiplier-selection strategies (equalising and CV search).
//!
//! Resampling only ever sees the training portion of a fold. The test
//! portion is scored untouched, and each fold records a [`LeakageAudit`]
//! built from element ids and synthetic-element provenance.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{self, Hyperparams, ModelSpec};
use crate::dataset::{self, Dataset, ElementId, Fold};
use crate::error::{Error, Result};
use crate::evaluation::metrics::pr_auc;
use crate::resampling::{self, Method, ResamplingSpec};
use crate::rng;

/// Multipliers searched by CVS unless told otherwise.
pub const DEFAULT_CVS_GRID: [f64; 10] = [1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];
pub const DEFAULT_FOLDS: usize = 10;
/// Inner folds used to pick a multiplier per outer fold in nested CVS.
pub const NESTED_INNER_FOLDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvsMode {
    /// Pick the multiplier whose Q^CV on the full dataset is highest.
    Oracle,
    /// Pick a multiplier per outer fold from its training portion only.
    Nested,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Fixed(f64),
    Eqs,
    Cvs(CvsMode),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Fixed(m) => write!(f, "fixed:{m}"),
            Strategy::Eqs => f.write_str("eqs"),
            Strategy::Cvs(CvsMode::Oracle) => f.write_str("cvs"),
            Strategy::Cvs(CvsMode::Nested) => f.write_str("cvs-nested"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eqs" => Ok(Strategy::Eqs),
            "cvs" | "cvs-oracle" => Ok(Strategy::Cvs(CvsMode::Oracle)),
            "cvs-nested" => Ok(Strategy::Cvs(CvsMode::Nested)),
            _ => {
                let m = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Usage(format!("unknown strategy {s:?}")))?;
                if !(m.is_finite() && m > 1.0) {
                    return Err(Error::Usage(format!("multiplier must exceed 1, got {m}")));
                }
                Ok(Strategy::Fixed(m))
            }
        }
    }
}

/// Id-provenance checks for one fold. All counts are zero when the fold
/// is leakage-free.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    /// Test elements carrying a `synth:` id.
    pub synthetic_in_test: usize,
    /// Ids present in both the resampled training set and the test set.
    pub shared_ids: usize,
    /// Synthetic training elements derived from a test element.
    pub derived_from_test: usize,
}

impl LeakageAudit {
    pub fn is_clean(&self) -> bool {
        *self == LeakageAudit::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub q_prc: f64,
    /// Method actually applied; `none` when the multiplier came out as 1.
    pub method: Method,
    pub multiplier: f64,
    pub hyperparams: Hyperparams,
    pub tuned: bool,
    pub train_size: usize,
    pub resampled_train_size: usize,
    pub resampled_class_counts: (usize, usize),
    pub test_size: usize,
    pub audit: LeakageAudit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub strategy: String,
    pub folds: Vec<FoldReport>,
    /// Arithmetic mean of the per-fold values.
    pub q_cv: f64,
}

impl CvReport {
    pub fn fold_values(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.q_prc).collect()
    }

    pub fn is_leakage_free(&self) -> bool {
        self.folds.iter().all(|f| f.audit.is_clean())
    }
}

#[derive(Clone, Copy, Debug)]
enum MultiplierRule {
    Fixed(f64),
    Equalize,
}

/// Q^CV of resampling with a fixed spec: stratified `folds`-fold CV where
/// each fold resamples its training part, tunes and fits `model` there and
/// scores the untouched test part by PR-AUC.
pub fn cv_quality(
    data: &Dataset,
    spec: &ResamplingSpec,
    model: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    spec.validate()?;
    let splits = split(data, folds, seed)?;
    run_folds(
        data,
        spec.method,
        spec.smote_k,
        MultiplierRule::Fixed(spec.multiplier),
        model,
        &splits,
        seed,
        if spec.method == Method::None {
            "none".to_string()
        } else {
            Strategy::Fixed(spec.multiplier).to_string()
        },
    )
}

/// Equalising strategy: the multiplier that makes the classes balanced.
pub fn select_multiplier_eqs(train: &Dataset) -> Result<f64> {
    train.imbalance_ratio()
}

/// Q^CV with the equalising strategy applied inside each fold, so every
/// fold's training portion is resampled to IR ≈ 1.
pub fn cv_quality_eqs(
    data: &Dataset,
    method: Method,
    smote_k: usize,
    model: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let splits = split(data, folds, seed)?;
    run_folds(
        data,
        method,
        smote_k,
        MultiplierRule::Equalize,
        model,
        &splits,
        seed,
        "eqs".into(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub multiplier: f64,
    pub q_cv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvsOutcome {
    pub mode: CvsMode,
    /// Oracle: the argmax. Nested: the most frequent per-fold choice.
    pub best_multiplier: f64,
    /// Oracle: Q^CV per effective grid point. Nested: empty.
    pub table: Vec<GridPoint>,
    pub effective_grid: Vec<f64>,
    /// The evaluation of the selected multiplier(s).
    pub report: CvReport,
}

/// Grid points in `(1, cap]`, ascending, where `cap` is the smallest
/// imbalance ratio among the dataset and its training folds.
pub fn effective_grid(grid: &[f64], cap: f64) -> Vec<f64> {
    let mut out: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&m| m > 1.0 && m <= cap)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn fold_cap(data: &Dataset, splits: &[Fold]) -> Result<f64> {
    let mut cap = data.imbalance_ratio()?;
    for fold in splits {
        cap = cap.min(data.subset(&fold.train).imbalance_ratio()?);
    }
    Ok(cap)
}

/// CV search over multipliers.
#[allow(clippy::too_many_arguments)]
pub fn select_multiplier_cvs(
    data: &Dataset,
    method: Method,
    smote_k: usize,
    model: &ModelSpec,
    grid: &[f64],
    folds: usize,
    seed: u64,
    mode: CvsMode,
) -> Result<CvsOutcome> {
    if method == Method::None {
        return Err(Error::Config("CV search needs a resampling method".into()));
    }
    let splits = split(data, folds, seed)?;
    let cap = fold_cap(data, &splits)?;
    let effective = effective_grid(grid, cap);
    if effective.is_empty() {
        return Err(Error::EmptyGrid { cap });
    }
    match mode {
        CvsMode::Oracle => {
            let mut table = Vec::with_capacity(effective.len());
            let mut best: Option<(f64, CvReport)> = None;
            for &m in &effective {
                let report = run_folds(
                    data,
                    method,
                    smote_k,
                    MultiplierRule::Fixed(m),
                    model,
                    &splits,
                    seed,
                    "cvs".into(),
                )?;
                table.push(GridPoint {
                    multiplier: m,
                    q_cv: report.q_cv,
                });
                if best.as_ref().is_none_or(|(_, b)| report.q_cv > b.q_cv) {
                    best = Some((m, report));
                }
            }
            let (best_multiplier, report) = best.expect("effective grid is nonempty");
            Ok(CvsOutcome {
                mode,
                best_multiplier,
                table,
                effective_grid: effective,
                report,
            })
        }
        CvsMode::Nested => {
            let mut reports = Vec::with_capacity(splits.len());
            for (f, fold) in splits.iter().enumerate() {
                let train = data.subset(&fold.train);
                let inner_seed = rng::sub_seed(seed, "nested-cvs", f as u64);
                let inner = select_multiplier_cvs(
                    &train,
                    method,
                    smote_k,
                    model,
                    grid,
                    NESTED_INNER_FOLDS,
                    inner_seed,
                    CvsMode::Oracle,
                )?;
                let mut one = run_folds(
                    data,
                    method,
                    smote_k,
                    MultiplierRule::Fixed(inner.best_multiplier),
                    model,
                    std::slice::from_ref(fold),
                    rng::sub_seed(seed, "nested-outer", f as u64),
                    "cvs-nested".into(),
                )?;
                let mut fr = one.folds.remove(0);
                fr.fold = f;
                reports.push(fr);
            }
            let q_cv = mean(reports.iter().map(|r| r.q_prc));
            let best_multiplier = modal(reports.iter().map(|r| r.multiplier));
            Ok(CvsOutcome {
                mode,
                best_multiplier,
                table: Vec::new(),
                effective_grid: effective,
                report: CvReport {
                    method,
                    strategy: "cvs-nested".into(),
                    folds: reports,
                    q_cv,
                },
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: CvReport,
    pub cvs: Option<CvsOutcome>,
}

/// One (method, strategy) evaluation; `Method::None` ignores the strategy.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    data: &Dataset,
    method: Method,
    strategy: Strategy,
    smote_k: usize,
    model: &ModelSpec,
    cvs_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Evaluation> {
    if method == Method::None {
        let report = cv_quality(data, &ResamplingSpec::none(), model, folds, seed)?;
        return Ok(Evaluation { report, cvs: None });
    }
    match strategy {
        Strategy::Fixed(m) => {
            let spec = ResamplingSpec::new(method, m).with_k(smote_k);
            Ok(Evaluation {
                report: cv_quality(data, &spec, model, folds, seed)?,
                cvs: None,
            })
        }
        Strategy::Eqs => Ok(Evaluation {
            report: cv_quality_eqs(data, method, smote_k, model, folds, seed)?,
            cvs: None,
        }),
        Strategy::Cvs(mode) => {
            let outcome =
                select_multiplier_cvs(data, method, smote_k, model, cvs_grid, folds, seed, mode)?;
            Ok(Evaluation {
                report: outcome.report.clone(),
                cvs: Some(outcome),
            })
        }
    }
}

fn split(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    dataset::stratified_kfold(data, folds, rng::sub_seed(seed, "folds", 0))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Most frequent value, ties to the smaller.
fn modal(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut best = (v[0], 0usize);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..]
            .iter()
            .position(|&x| x != v[i])
            .map_or(v.len(), |p| i + p);
        if j - i > best.1 {
            best = (v[i], j - i);
        }
        i = j;
    }
    best.0
}

fn resample_seed(seed: u64, method: Method, multiplier: f64, fold: usize) -> u64 {
    rng::sub_seed(
        seed,
        &format!("resample/{method}/{multiplier}"),
        fold as u64,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_folds(
    data: &Dataset,
    method: Method,
    smote_k: usize,
    rule: MultiplierRule,
    model: &ModelSpec,
    splits: &[Fold],
    seed: u64,
    strategy: String,
) -> Result<CvReport> {
    let mut reports = Vec::with_capacity(splits.len());
    for (f, fold) in splits.iter().enumerate() {
        let train = data.subset(&fold.train);
        let test = data.subset(&fold.test);
        let train_ir = train.imbalance_ratio()?;
        let multiplier = match rule {
            MultiplierRule::Fixed(m) => m,
            MultiplierRule::Equalize => select_multiplier_eqs(&train)?,
        };
        let applied = if method == Method::None || multiplier == 1.0 {
            Method::None
        } else {
            method
        };
        if applied != Method::None && multiplier > train_ir {
            return Err(Error::MultiplierOutOfRange {
                multiplier,
                cap: train_ir,
                fold: Some(f),
            });
        }
        let spec = ResamplingSpec {
            method: applied,
            multiplier: if applied == Method::None {
                1.0
            } else {
                multiplier
            },
            smote_k,
        };
        let resampled =
            resampling::resample(&train, &spec, resample_seed(seed, method, multiplier, f))
                .map_err(|e| match e {
                    Error::MultiplierOutOfRange {
                        multiplier, cap, ..
                    } => Error::MultiplierOutOfRange {
                        multiplier,
                        cap,
                        fold: Some(f),
                    },
                    other => other,
                })?;

        // Inner tuning splits get the same treatment, capped by their own IR.
        let prepare = |inner: &Dataset, s: u64| -> Result<Dataset> {
            if applied == Method::None {
                return Ok(inner.clone());
            }
            let inner_ir = inner.imbalance_ratio()?;
            let m = match rule {
                MultiplierRule::Fixed(m) => m.min(inner_ir),
                MultiplierRule::Equalize => inner_ir,
            };
            if m <= 1.0 {
                return Ok(inner.clone());
            }
            let inner_spec = ResamplingSpec {
                method: applied,
                multiplier: m,
                smote_k,
            };
            Ok(resampling::resample(inner, &inner_spec, s)?.dataset)
        };
        let tuning = model
            .clone()
            .with_seed(rng::sub_seed(seed, "tune", f as u64));
        let fit = classifiers::fit_tuned(&tuning, &train, prepare, &resampled.dataset)?;
        let scores = fit.model.score_dataset(&test)?;
        let q_prc = pr_auc(&scores, test.labels())?;

        let test_ids: HashSet<ElementId> = test.ids().iter().copied().collect();
        let audit = LeakageAudit {
            synthetic_in_test: test.ids().iter().filter(|id| id.is_synthetic()).count(),
            shared_ids: resampled
                .dataset
                .ids()
                .iter()
                .filter(|id| test_ids.contains(id))
                .count(),
            derived_from_test: resampled
                .provenance
                .parents()
                .iter()
                .filter(|(_, parents)| parents.iter().any(|p| test_ids.contains(p)))
                .count(),
        };
        reports.push(FoldReport {
            fold: f,
            q_prc,
            method: applied,
            multiplier: spec.multiplier,
            hyperparams: fit.chosen,
            tuned: fit.tuned,
            train_size: train.len(),
            resampled_train_size: resampled.dataset.len(),
            resampled_class_counts: resampled.dataset.class_counts(),
            test_size: test.len(),
            audit,
        });
    }
    Ok(CvReport {
        method,
        strategy,
        q_cv: mean(reports.iter().map(|r| r.q_prc)),
        folds: reports,
    })
}
