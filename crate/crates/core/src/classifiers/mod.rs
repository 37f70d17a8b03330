//! Decision tree, k-NN and L1 logistic regression scorers with
//! hyperparameters chosen by stratified inner cross-validation on PR-AUC.

pub mod knn;
pub mod logreg;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::metrics::pr_auc;
use crate::rng;

pub use knn::KnnModel;
pub use logreg::{LogRegModel, SolverOptions};
pub use tree::DecisionTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    #[serde(rename = "tree")]
    DecisionTree,
    Knn,
    #[serde(rename = "logreg")]
    LogRegL1,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [
        ModelFamily::DecisionTree,
        ModelFamily::Knn,
        ModelFamily::LogRegL1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::DecisionTree => "tree",
            ModelFamily::Knn => "knn",
            ModelFamily::LogRegL1 => "logreg",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown model {s:?} (expected tree, knn or logreg)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Hyperparams {
    Tree { max_depth: usize, min_leaf: usize },
    Knn { k: usize },
    LogReg { lambda: f64 },
}

impl Hyperparams {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparams::Tree { .. } => ModelFamily::DecisionTree,
            Hyperparams::Knn { .. } => ModelFamily::Knn,
            Hyperparams::LogReg { .. } => ModelFamily::LogRegL1,
        }
    }

    /// Orders candidates simplest first: shallower trees then larger
    /// leaves, more neighbours, heavier penalties.
    fn simplicity_cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (
                Hyperparams::Tree {
                    max_depth: d1,
                    min_leaf: l1,
                },
                Hyperparams::Tree {
                    max_depth: d2,
                    min_leaf: l2,
                },
            ) => d1.cmp(d2).then(l2.cmp(l1)),
            (Hyperparams::Knn { k: a }, Hyperparams::Knn { k: b }) => b.cmp(a),
            (Hyperparams::LogReg { lambda: a }, Hyperparams::LogReg { lambda: b }) => {
                b.total_cmp(a)
            }
            _ => std::cmp::Ordering::Equal,
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Tree {
                max_depth,
                min_leaf,
            } => {
                write!(f, "max_depth={max_depth};min_leaf={min_leaf}")
            }
            Hyperparams::Knn { k } => write!(f, "k={k}"),
            Hyperparams::LogReg { lambda } => write!(f, "lambda={lambda:e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub grid: Vec<Hyperparams>,
    /// Used when the training data is too small to tune on.
    pub fallback: Hyperparams,
    pub tuning_folds: usize,
    pub seed: u64,
}

impl ModelSpec {
    /// Default grids: tree depth {2,4,6,8,12,25} × min leaf {1,5};
    /// k-NN k {1,3,5,7,11,15}; L1 weight {1e-4 .. 10}. Three tuning folds.
    pub fn default_for(family: ModelFamily, seed: u64) -> Self {
        let (grid, fallback) = match family {
            ModelFamily::DecisionTree => (
                [2, 4, 6, 8, 12, 25]
                    .into_iter()
                    .flat_map(|max_depth| {
                        [1, 5].map(|min_leaf| Hyperparams::Tree {
                            max_depth,
                            min_leaf,
                        })
                    })
                    .collect(),
                Hyperparams::Tree {
                    max_depth: 6,
                    min_leaf: 5,
                },
            ),
            ModelFamily::Knn => (
                [1, 3, 5, 7, 11, 15]
                    .map(|k| Hyperparams::Knn { k })
                    .to_vec(),
                Hyperparams::Knn { k: 5 },
            ),
            ModelFamily::LogRegL1 => (
                [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
                    .map(|lambda| Hyperparams::LogReg { lambda })
                    .to_vec(),
                Hyperparams::LogReg { lambda: 1e-2 },
            ),
        };
        Self {
            family,
            grid,
            fallback,
            tuning_folds: 3,
            seed,
        }
    }

    /// A spec that skips tuning and always fits `params`.
    pub fn fixed(params: Hyperparams, seed: u64) -> Self {
        Self {
            family: params.family(),
            grid: vec![params],
            fallback: params,
            tuning_folds: 3,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        if self.tuning_folds < 2 {
            return Err(Error::Config("tuning needs at least 2 folds".into()));
        }
        let all = self.grid.iter().chain([&self.fallback]);
        for h in all {
            if h.family() != self.family {
                return Err(Error::Config(format!(
                    "{h} does not belong to {}",
                    self.family
                )));
            }
            let ok = match *h {
                Hyperparams::Tree { min_leaf, .. } => min_leaf >= 1,
                Hyperparams::Knn { k } => k >= 1,
                Hyperparams::LogReg { lambda } => lambda.is_finite() && lambda >= 0.0,
            };
            if !ok {
                return Err(Error::Config(format!("invalid hyperparameters {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedScorer {
    Tree(DecisionTree),
    Knn(KnnModel),
    LogReg(LogRegModel),
}

impl TrainedScorer {
    pub fn fit(params: &Hyperparams, train: &Dataset) -> Self {
        match *params {
            Hyperparams::Tree {
                max_depth,
                min_leaf,
            } => TrainedScorer::Tree(DecisionTree::fit(train, max_depth, min_leaf)),
            Hyperparams::Knn { k } => TrainedScorer::Knn(KnnModel::fit(train, k)),
            Hyperparams::LogReg { lambda } => {
                TrainedScorer::LogReg(LogRegModel::fit(train, lambda, &SolverOptions::default()).0)
            }
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            TrainedScorer::Tree(_) => ModelFamily::DecisionTree,
            TrainedScorer::Knn(_) => ModelFamily::Knn,
            TrainedScorer::LogReg(_) => ModelFamily::LogRegL1,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedScorer::Tree(m) => m.n_features(),
            TrainedScorer::Knn(m) => m.n_features(),
            TrainedScorer::LogReg(m) => m.n_features(),
        }
    }

    /// Minor-class score in `[0, 1]` for one feature vector.
    pub fn score_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(match self {
            TrainedScorer::Tree(m) => m.score(x),
            TrainedScorer::Knn(m) => m.score(x),
            TrainedScorer::LogReg(m) => m.score(x),
        })
    }

    /// Scores a row-major `n × d` matrix.
    pub fn score(&self, x: &[f64], n_features: usize) -> Result<Vec<f64>> {
        if n_features != self.n_features() || !x.len().is_multiple_of(n_features.max(1)) {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: n_features,
            });
        }
        x.chunks_exact(n_features)
            .map(|row| self.score_one(row))
            .collect()
    }

    pub fn score_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.score(data.features(), data.n_features())
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub model: TrainedScorer,
    pub chosen: Hyperparams,
    /// False when the data was too small to tune and the fallback was used.
    pub tuned: bool,
    /// Mean inner-CV PR-AUC per grid candidate, when tuned.
    pub tuning_table: Vec<(Hyperparams, f64)>,
}

/// Tunes on `train` by inner CV and refits the winner on all of `train`.
pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<FitReport> {
    fit_tuned(spec, train, |d, _| Ok(d.clone()), train)
}

/// Tunes on folds of `tuning_base`, applying `prepare` (e.g. resampling,
/// keyed by a seed) to each inner training split only; inner validation
/// splits stay untouched. The winner is refit on `final_train`.
pub fn fit_tuned<F>(
    spec: &ModelSpec,
    tuning_base: &Dataset,
    prepare: F,
    final_train: &Dataset,
) -> Result<FitReport>
where
    F: Fn(&Dataset, u64) -> Result<Dataset>,
{
    spec.validate()?;
    final_train.require_both_classes()?;
    tuning_base.require_both_classes()?;

    let (zeros, ones) = tuning_base.class_counts();
    let (chosen, tuned, tuning_table) = if spec.grid.len() == 1 {
        (spec.grid[0], true, Vec::new())
    } else if zeros.min(ones) < spec.tuning_folds {
        (spec.fallback, false, Vec::new())
    } else {
        let table = tune(spec, tuning_base, &prepare)?;
        let mut best: Option<(Hyperparams, f64)> = None;
        for &(h, q) in &table {
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((h, q));
            }
        }
        (best.expect("grid is nonempty").0, true, table)
    };
    Ok(FitReport {
        model: TrainedScorer::fit(&chosen, final_train),
        chosen,
        tuned,
        tuning_table,
    })
}

/// Mean validation PR-AUC per candidate, simplest candidate first.
fn tune<F>(spec: &ModelSpec, base: &Dataset, prepare: &F) -> Result<Vec<(Hyperparams, f64)>>
where
    F: Fn(&Dataset, u64) -> Result<Dataset>,
{
    let mut grid = spec.grid.clone();
    grid.sort_by(Hyperparams::simplicity_cmp);
    let folds = dataset::stratified_kfold(
        base,
        spec.tuning_folds,
        rng::sub_seed(spec.seed, "tune-folds", 0),
    )?;
    let mut sums = vec![0.0; grid.len()];
    for (f, fold) in folds.iter().enumerate() {
        let inner = prepare(
            &base.subset(&fold.train),
            rng::sub_seed(spec.seed, "tune-prepare", f as u64),
        )?;
        let val = base.subset(&fold.test);
        let scores = grid_scores(&grid, &inner, &val);
        for (sum, s) in sums.iter_mut().zip(&scores) {
            *sum += pr_auc(s, val.labels())?;
        }
    }
    let k = folds.len() as f64;
    Ok(grid
        .into_iter()
        .zip(sums)
        .map(|(h, s)| (h, s / k))
        .collect())
}

/// Validation scores for every candidate, sharing work across the grid.
fn grid_scores(grid: &[Hyperparams], train: &Dataset, val: &Dataset) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); grid.len()];
    match grid[0].family() {
        ModelFamily::DecisionTree => {
            let mut leaves: Vec<usize> = grid
                .iter()
                .filter_map(|h| match *h {
                    Hyperparams::Tree { min_leaf, .. } => Some(min_leaf),
                    _ => None,
                })
                .collect();
            leaves.sort_unstable();
            leaves.dedup();
            for leaf in leaves {
                let members: Vec<(usize, usize)> = grid
                    .iter()
                    .enumerate()
                    .filter_map(|(c, h)| match *h {
                        Hyperparams::Tree {
                            max_depth,
                            min_leaf,
                        } if min_leaf == leaf => Some((c, max_depth)),
                        _ => None,
                    })
                    .collect();
                let deepest = members.iter().map(|m| m.1).max().unwrap_or(0);
                let tree = DecisionTree::fit(train, deepest, leaf);
                for (c, depth) in members {
                    out[c] = val.rows().map(|x| tree.score_at_depth(x, depth)).collect();
                }
            }
        }
        ModelFamily::Knn => {
            let ks: Vec<usize> = grid
                .iter()
                .map(|h| match *h {
                    Hyperparams::Knn { k } => k,
                    _ => 1,
                })
                .collect();
            let max_k = ks.iter().copied().max().unwrap_or(1);
            let model = KnnModel::fit(train, max_k);
            for x in val.rows() {
                let nearest = model.neighbor_labels(x, max_k);
                for (c, &k) in ks.iter().enumerate() {
                    out[c].push(knn::minor_fraction(&nearest, k));
                }
            }
        }
        ModelFamily::LogRegL1 => {
            let standardizer = logreg::Standardizer::fit(train);
            let x = standardizer.transform(train);
            let mut order: Vec<usize> = (0..grid.len()).collect();
            let lambda = |c: usize| match grid[c] {
                Hyperparams::LogReg { lambda } => lambda,
                _ => 0.0,
            };
            order.sort_by(|&a, &b| lambda(b).total_cmp(&lambda(a)));
            let mut warm: Option<(Vec<f64>, f64)> = None;
            for c in order {
                let (model, _) = LogRegModel::fit_standardized(
                    standardizer.clone(),
                    &x,
                    train.labels(),
                    lambda(c),
                    warm.as_ref().map(|(w, b)| (w.as_slice(), *b)),
                    &SolverOptions::default(),
                );
                out[c] = val.rows().map(|r| model.score(r)).collect();
                warm = Some((model.weights.clone(), model.bias));
            }
        }
    }
    out
}
