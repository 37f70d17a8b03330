//! Resampling for imbalanced binary classification.
//!
//! The pipeline resamples a training set with random oversampling (ROS),
//! random undersampling (RUS) or SMOTE, controlled by a multiplier `m`
//! that divides the imbalance ratio; fits a decision tree, k-NN or L1
//! logistic regression; and scores the result by cross-validated area
//! under the precision-recall curve. Multipliers are chosen either to
//! equalise the classes or by CV search, and methods are compared across
//! many datasets with Dolan-More performance profiles.
//!
//! Label `1` is always the minor class.

pub mod benchmark;
pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod resampling;
pub mod rng;
pub mod synth;

pub use classifiers::{fit, Hyperparams, ModelFamily, ModelSpec, TrainedScorer};
pub use dataset::{load_csv, save_csv, stratified_kfold, CsvOptions, Dataset, ElementId, Fold};
pub use error::{Error, Result};
pub use evaluation::{cv_quality, pr_auc, CvReport, Strategy};
pub use resampling::{resample, Method, Resampled, ResamplingSpec};
pub use synth::{generate_gaussian_pool, GaussianPoolConfig};
