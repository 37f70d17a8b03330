//! Python bindings: datasets, resampling, PR-AUC, cross-validated
//! evaluation, pool generation and Dolan-More profiles.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rebalance::benchmark::{self, QualityMatrix};
use rebalance::evaluation::cv::{self, Strategy, DEFAULT_CVS_GRID};
use rebalance::resampling::{Provenance, DEFAULT_SMOTE_K};
use rebalance::synth::{self, GaussianPoolConfig};
use rebalance::{CsvOptions, Error, Method, ModelFamily, ModelSpec, ResamplingSpec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(format!("{}: {e}", e.tag())),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// Binary dataset; label 1 is the minor class.
#[pyclass(name = "Dataset", module = "rebalance", frozen)]
struct PyDataset {
    inner: rebalance::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<Self> {
        let d = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("rows have different lengths"));
        }
        let flat = features.into_iter().flatten().collect();
        let inner = rebalance::Dataset::new(flat, d, labels).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, label_column = "label", relabel = false))]
    fn load_csv(path: &str, label_column: &str, relabel: bool) -> PyResult<Self> {
        let options = CsvOptions {
            label_column: label_column.into(),
            relabel,
        };
        let loaded = rebalance::load_csv(path, &options).map_err(py_err)?;
        Ok(Self {
            inner: loaded.dataset,
        })
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        rebalance::save_csv(&self.inner, path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let (major, minor) = self.inner.class_counts();
        format!(
            "Dataset(n={}, d={}, major={major}, minor={minor})",
            self.inner.len(),
            self.inner.n_features()
        )
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    /// `orig:<i>` / `synth:<j>` element ids.
    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().iter().map(ToString::to_string).collect()
    }

    /// `(major, minor)` counts.
    fn class_counts(&self) -> (usize, usize) {
        self.inner.class_counts()
    }

    fn imbalance_ratio(&self) -> PyResult<f64> {
        self.inner.imbalance_ratio().map_err(py_err)
    }
}

type ProvenanceRow = (String, String, Option<String>, Option<f64>);

/// Returns the resampled dataset and one `(synth_id, seed_id, neighbor_id,
/// lambda)` row per synthetic element; ROS rows have no neighbour or lambda.
#[pyfunction]
#[pyo3(signature = (dataset, method, multiplier, k = DEFAULT_SMOTE_K, seed = 0))]
fn resample(
    dataset: &PyDataset,
    method: &str,
    multiplier: f64,
    k: usize,
    seed: u64,
) -> PyResult<(PyDataset, Vec<ProvenanceRow>)> {
    let spec = ResamplingSpec::new(parse::<Method>(method)?, multiplier).with_k(k);
    let out = rebalance::resample(&dataset.inner, &spec, seed).map_err(py_err)?;
    let rows = match &out.provenance {
        Provenance::None => Vec::new(),
        Provenance::Ros(records) => records
            .iter()
            .map(|r| (r.synth.to_string(), r.source.to_string(), None, None))
            .collect(),
        Provenance::Smote(records) => records
            .iter()
            .map(|r| {
                (
                    r.synth.to_string(),
                    r.seed.to_string(),
                    Some(r.neighbor.to_string()),
                    Some(r.lambda),
                )
            })
            .collect(),
    };
    Ok((PyDataset { inner: out.dataset }, rows))
}

/// Step-interpolated area under the precision-recall curve.
#[pyfunction]
fn pr_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    rebalance::pr_auc(&scores, &labels).map_err(py_err)
}

/// Cross-validated PR-AUC of one (model, method, strategy) combination.
/// `strategy` is `fixed:<m>`, `eqs`, `cvs` or `cvs-nested`.
#[pyfunction]
#[pyo3(signature = (dataset, model = "tree", method = "none", strategy = "eqs", folds = 10, seed = 0, k = DEFAULT_SMOTE_K, cvs_grid = None))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    model: &str,
    method: &str,
    strategy: &str,
    folds: usize,
    seed: u64,
    k: usize,
    cvs_grid: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = ModelSpec::default_for(parse::<ModelFamily>(model)?, seed);
    let grid = cvs_grid.unwrap_or_else(|| DEFAULT_CVS_GRID.to_vec());
    let eval = cv::evaluate(
        &dataset.inner,
        parse::<Method>(method)?,
        parse::<Strategy>(strategy)?,
        k,
        &spec,
        &grid,
        folds,
        seed,
    )
    .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("q_cv", eval.report.q_cv)?;
    out.set_item("method", eval.report.method.to_string())?;
    out.set_item("strategy", &eval.report.strategy)?;
    out.set_item("fold_values", eval.report.fold_values())?;
    let multipliers: Vec<f64> = eval.report.folds.iter().map(|f| f.multiplier).collect();
    out.set_item("multipliers", multipliers)?;
    let hyper: Vec<String> = eval
        .report
        .folds
        .iter()
        .map(|f| f.hyperparams.to_string())
        .collect();
    out.set_item("hyperparams", hyper)?;
    out.set_item("leakage_free", eval.report.is_leakage_free())?;
    if let Some(cvs) = &eval.cvs {
        out.set_item("best_multiplier", cvs.best_multiplier)?;
        let table: Vec<(f64, f64)> = cvs.table.iter().map(|g| (g.multiplier, g.q_cv)).collect();
        out.set_item("cvs_table", table)?;
    }
    Ok(out)
}

/// Gaussian-mixture pool as `(name, Dataset)` pairs.
#[pyfunction]
#[pyo3(signature = (pool_size, seed = 0, d_range = (6, 40), size_range = (200, 1000), minor_fraction_range = (0.05, 0.35)))]
fn generate_pool(
    pool_size: usize,
    seed: u64,
    d_range: (usize, usize),
    size_range: (usize, usize),
    minor_fraction_range: (f64, f64),
) -> PyResult<Vec<(String, PyDataset)>> {
    let cfg = GaussianPoolConfig {
        d_range: [d_range.0, d_range.1],
        size_range: [size_range.0, size_range.1],
        minor_fraction_range: [minor_fraction_range.0, minor_fraction_range.1],
        ..GaussianPoolConfig::paper_defaults(pool_size, seed)
    };
    let pool = synth::generate_gaussian_pool(&cfg).map_err(py_err)?;
    Ok(pool
        .into_iter()
        .map(|g| (g.name, PyDataset { inner: g.dataset }))
        .collect())
}

/// Loads a pool written by `rebalance generate` (manifest or directory).
#[pyfunction]
fn load_pool(path: &str) -> PyResult<Vec<(String, PyDataset)>> {
    let pool = synth::read_pool(path).map_err(py_err)?;
    Ok(pool
        .into_iter()
        .map(|(n, d)| (n, PyDataset { inner: d }))
        .collect())
}

/// Dolan-More curves for a task × method matrix (`None` = missing).
/// Without `betas`, uses `points` log-spaced values up to the largest
/// best-to-worst ratio.
#[pyfunction]
#[pyo3(signature = (methods, values, betas = None, points = 200))]
fn dolan_more<'py>(
    py: Python<'py>,
    methods: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
    betas: Option<Vec<f64>>,
    points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let rows = values
        .into_iter()
        .enumerate()
        .map(|(t, r)| (format!("t{t}"), r))
        .collect();
    let q = QualityMatrix::from_rows(methods, rows).map_err(py_err)?;
    let betas = match betas {
        Some(b) => b,
        None => benchmark::default_beta_grid(&q, points).map_err(py_err)?,
    };
    let profile = benchmark::dolan_more(&q, &betas).map_err(py_err)?;
    let curves = PyDict::new(py);
    for c in &profile.curves {
        curves.set_item(&c.method, c.p.clone())?;
    }
    let out = PyDict::new(py);
    out.set_item("betas", betas)?;
    out.set_item("curves", curves)?;
    out.set_item("retained_rows", profile.retained_rows)?;
    out.set_item("dropped_rows", profile.dropped_rows)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "rebalance")]
fn rebalance_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(pr_auc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pool, m)?)?;
    m.add_function(wrap_pyfunction!(load_pool, m)?)?;
    m.add_function(wrap_pyfunction!(dolan_more, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
