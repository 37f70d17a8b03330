//! PR-AUC and the cross-validated evaluation protocol.

pub mod cv;
pub mod metrics;

pub use cv::{
    cv_quality, cv_quality_eqs, effective_grid, evaluate, select_multiplier_cvs,
    select_multiplier_eqs, CvReport, CvsMode, CvsOutcome, Evaluation, FoldReport, GridPoint,
    LeakageAudit, Strategy, DEFAULT_CVS_GRID, DEFAULT_FOLDS,
};
pub use metrics::{pr_auc, pr_curve, PrCurve, PrPoint};
