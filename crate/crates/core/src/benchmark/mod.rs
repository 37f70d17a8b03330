//! Benchmark matrix runner and Dolan-More performance profiles.

pub mod matrix;
pub mod profile;
pub mod render;

pub use matrix::{
    cell_count, default_cells, quality_matrix_from_results, run_matrix, run_matrix_with_progress,
    Cell, CellOutcome, MatrixConfig, MatrixRun, RESULTS_HEADER,
};
pub use profile::{
    beta_max, default_beta_grid, dolan_more, DolanMoreCurve, Profile, QualityMatrix,
};
pub use render::{emit_curves, CurveFormat};
