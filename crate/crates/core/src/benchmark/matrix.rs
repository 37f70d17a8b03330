//! The experiment matrix: datasets × models × (method, strategy) cells,
//! persisted to an append-only results CSV that can be resumed.
//!
//! Cells are numbered dataset-major, then model, then cell. Every cell of
//! a dataset shares one evaluation seed, so all methods see the same folds.
//! Cells may finish in any order on the work pool; rows are written in
//! cell order, buffered until the next cell in sequence is done.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::profile::QualityMatrix;
use crate::classifiers::{ModelFamily, ModelSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::cv::{self, CvsMode, Evaluation, Strategy, DEFAULT_CVS_GRID};
use crate::resampling::{Method, ResamplingSpec, DEFAULT_SMOTE_K};
use crate::rng;

pub const RESULTS_HEADER: [&str; 9] = [
    "dataset_id",
    "model",
    "method",
    "strategy",
    "multiplier",
    "fold",
    "q_prc",
    "chosen_hyperparams",
    "status",
];

/// Strategy column value for the no-resampling cell.
const NO_STRATEGY: &str = "-";
const ALL_FOLDS: &str = "all";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    /// `None` only for `Method::None`.
    pub strategy: Option<Strategy>,
}

impl Cell {
    pub fn none() -> Self {
        Self {
            method: Method::None,
            strategy: None,
        }
    }

    pub fn new(method: Method, strategy: Strategy) -> Self {
        Self {
            method,
            strategy: Some(strategy),
        }
    }

    fn strategy_label(&self) -> String {
        self.strategy
            .map_or_else(|| NO_STRATEGY.to_string(), |s| s.to_string())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.strategy {
            None => write!(f, "{}", self.method),
            Some(s) => write!(f, "{}+{s}", self.method),
        }
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('+') {
            None if s == "none" => Ok(Cell::none()),
            None => Err(Error::Usage(format!(
                "cell {s:?} needs a strategy, e.g. {s}+eqs"
            ))),
            Some((method, strategy)) => {
                let method: Method = method.parse()?;
                if method == Method::None {
                    return Err(Error::Usage("the none cell takes no strategy".into()));
                }
                Ok(Cell::new(method, strategy.parse()?))
            }
        }
    }
}

/// none, then {ros, rus, smote} × {eqs, cvs}.
pub fn default_cells() -> Vec<Cell> {
    let mut cells = vec![Cell::none()];
    for method in [Method::Ros, Method::Rus, Method::Smote] {
        cells.push(Cell::new(method, Strategy::Eqs));
        cells.push(Cell::new(method, Strategy::Cvs(CvsMode::Oracle)));
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub models: Vec<ModelFamily>,
    pub cells: Vec<Cell>,
    pub folds: usize,
    pub seed: u64,
    pub smote_k: usize,
    pub cvs_grid: Vec<f64>,
    pub jobs: usize,
}

impl MatrixConfig {
    pub fn new(models: Vec<ModelFamily>, cells: Vec<Cell>, folds: usize, seed: u64) -> Self {
        Self {
            models,
            cells,
            folds,
            seed,
            smote_k: DEFAULT_SMOTE_K,
            cvs_grid: DEFAULT_CVS_GRID.to_vec(),
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub dataset: String,
    pub model: ModelFamily,
    pub cell: Cell,
    /// Q^CV; `None` for a failed cell.
    pub q: Option<f64>,
    /// `ok` or `error:<tag>`.
    pub status: String,
    /// Present for cells computed in this run, absent for resumed ones.
    pub evaluation: Option<Evaluation>,
}

#[derive(Clone, Debug)]
pub struct MatrixRun {
    pub outcomes: Vec<CellOutcome>,
    pub resumed_cells: usize,
}

/// Number of cells in the full matrix.
pub fn cell_count(pool_len: usize, cfg: &MatrixConfig) -> usize {
    pool_len * cfg.models.len() * cfg.cells.len()
}

impl MatrixRun {
    pub fn error_cells(&self) -> usize {
        self.outcomes.iter().filter(|o| o.q.is_none()).count()
    }

    /// q_ti for one model, tasks in pool order, methods in cell order.
    pub fn quality_matrix(&self, model: ModelFamily) -> QualityMatrix {
        quality_matrix_from(
            self.outcomes
                .iter()
                .filter(|o| o.model == model)
                .map(|o| (o.dataset.clone(), o.cell.to_string(), o.q)),
        )
    }
}

fn quality_matrix_from(
    entries: impl Iterator<Item = (String, String, Option<f64>)>,
) -> QualityMatrix {
    let mut tasks: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    for (task, method, q) in entries {
        let t = tasks.iter().position(|x| *x == task).unwrap_or_else(|| {
            tasks.push(task);
            tasks.len() - 1
        });
        let m = methods
            .iter()
            .position(|x| *x == method)
            .unwrap_or_else(|| {
                methods.push(method);
                methods.len() - 1
            });
        cells.push((t, m, q));
    }
    let mut matrix = QualityMatrix::new(tasks, methods);
    for (t, m, q) in cells {
        matrix.set(t, m, q);
    }
    matrix
}

/// Evaluation seed shared by every cell of a dataset.
pub fn dataset_seed(seed: u64, dataset: &str) -> u64 {
    rng::sub_seed(seed, &format!("dataset/{dataset}"), 0)
}

pub fn evaluate_cell(
    data: &Dataset,
    model: ModelFamily,
    cell: &Cell,
    cfg: &MatrixConfig,
    seed: u64,
) -> Result<Evaluation> {
    let spec = ModelSpec::default_for(model, seed);
    match cell.strategy {
        None => Ok(Evaluation {
            report: cv::cv_quality(data, &ResamplingSpec::none(), &spec, cfg.folds, seed)?,
            cvs: None,
        }),
        Some(strategy) => cv::evaluate(
            data,
            cell.method,
            strategy,
            cfg.smote_k,
            &spec,
            &cfg.cvs_grid,
            cfg.folds,
            seed,
        ),
    }
}

fn fmt_num(v: f64) -> String {
    v.to_string()
}

fn outcome_rows(outcome: &CellOutcome) -> Vec<Vec<String>> {
    let head = |multiplier: String, fold: String, q: String, hp: String, status: String| {
        vec![
            outcome.dataset.clone(),
            outcome.model.to_string(),
            outcome.cell.method.to_string(),
            outcome.cell.strategy_label(),
            multiplier,
            fold,
            q,
            hp,
            status,
        ]
    };
    let Some(eval) = &outcome.evaluation else {
        return vec![head(
            String::new(),
            ALL_FOLDS.into(),
            String::new(),
            String::new(),
            outcome.status.clone(),
        )];
    };
    let mut rows: Vec<Vec<String>> = eval
        .report
        .folds
        .iter()
        .map(|f| {
            head(
                fmt_num(f.multiplier),
                f.fold.to_string(),
                fmt_num(f.q_prc),
                f.hyperparams.to_string(),
                "ok".into(),
            )
        })
        .collect();
    let summary_multiplier = match &eval.cvs {
        Some(c) if c.mode == CvsMode::Oracle => fmt_num(c.best_multiplier),
        _ => {
            let first = eval.report.folds[0].multiplier;
            if eval.report.folds.iter().all(|f| f.multiplier == first) {
                fmt_num(first)
            } else {
                String::new()
            }
        }
    };
    rows.push(head(
        summary_multiplier,
        ALL_FOLDS.into(),
        fmt_num(eval.report.q_cv),
        String::new(),
        "ok".into(),
    ));
    rows
}

struct Plan<'a> {
    pool: &'a [(String, Dataset)],
    cfg: &'a MatrixConfig,
}

impl Plan<'_> {
    fn len(&self) -> usize {
        self.pool.len() * self.cfg.models.len() * self.cfg.cells.len()
    }

    fn at(&self, index: usize) -> (usize, ModelFamily, Cell) {
        let per_dataset = self.cfg.models.len() * self.cfg.cells.len();
        let t = index / per_dataset;
        let rest = index % per_dataset;
        (
            t,
            self.cfg.models[rest / self.cfg.cells.len()],
            self.cfg.cells[rest % self.cfg.cells.len()],
        )
    }

    fn run(&self, index: usize) -> CellOutcome {
        let (t, model, cell) = self.at(index);
        let (name, data) = &self.pool[t];
        let result = evaluate_cell(
            data,
            model,
            &cell,
            self.cfg,
            dataset_seed(self.cfg.seed, name),
        );
        match result {
            Ok(eval) => CellOutcome {
                dataset: name.clone(),
                model,
                cell,
                q: Some(eval.report.q_cv),
                status: "ok".into(),
                evaluation: Some(eval),
            },
            Err(e) => CellOutcome {
                dataset: name.clone(),
                model,
                cell,
                q: None,
                status: format!("error:{}", e.tag()),
                evaluation: None,
            },
        }
    }
}

/// Rows of completed cells found in an existing results file, checked
/// against the plan. Trailing rows of an unfinished cell are discarded.
fn read_completed(path: &Path, plan: &Plan<'_>) -> Result<(Vec<Vec<String>>, Vec<CellOutcome>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Config(format!(
            "{} is not a results file",
            path.display()
        )));
    }
    let mut kept = Vec::new();
    let mut pending = Vec::new();
    let mut outcomes = Vec::new();
    for record in rdr.records() {
        let record: Vec<String> = record?.iter().map(str::to_string).collect();
        let index = outcomes.len();
        if index >= plan.len() {
            return Err(Error::Config(
                "results file has more cells than this run".into(),
            ));
        }
        let (t, model, cell) = plan.at(index);
        let expected = [
            plan.pool[t].0.clone(),
            model.to_string(),
            cell.method.to_string(),
            cell.strategy_label(),
        ];
        if record.len() != RESULTS_HEADER.len() || record[..4] != expected {
            return Err(Error::Config(format!(
                "results file does not match this run at cell {index} ({})",
                expected.join(",")
            )));
        }
        let done = record[5] == ALL_FOLDS;
        let q = if done && !record[6].is_empty() {
            Some(record[6].parse::<f64>().map_err(|_| Error::Parse {
                line: 0,
                message: format!("bad q_prc {:?}", record[6]),
            })?)
        } else {
            None
        };
        let status = record[8].clone();
        pending.push(record);
        if done {
            kept.append(&mut pending);
            outcomes.push(CellOutcome {
                dataset: plan.pool[t].0.clone(),
                model,
                cell,
                q,
                status,
                evaluation: None,
            });
        }
    }
    Ok((kept, outcomes))
}

struct Sink<'a> {
    progress: &'a (dyn Fn(&CellOutcome, usize) + Sync),
    writer: Option<csv::Writer<BufWriter<File>>>,
    next: usize,
    buffered: BTreeMap<usize, CellOutcome>,
    done: Vec<CellOutcome>,
    error: Option<Error>,
}

impl Sink<'_> {
    fn accept(&mut self, index: usize, outcome: CellOutcome) {
        self.buffered.insert(index, outcome);
        while let Some(outcome) = self.buffered.remove(&self.next) {
            if let Some(w) = self.writer.as_mut() {
                let written = outcome_rows(&outcome)
                    .iter()
                    .try_for_each(|row| w.write_record(row))
                    .and_then(|_| w.flush().map_err(csv::Error::from));
                if let Err(e) = written {
                    self.error.get_or_insert(e.into());
                }
            }
            (self.progress)(&outcome, self.next);
            self.done.push(outcome);
            self.next += 1;
        }
    }
}

/// Runs every cell of the matrix. With `results`, rows are appended to
/// that CSV as cells complete; with `resume`, cells already completed in
/// it are kept and skipped.
pub fn run_matrix(
    pool: &[(String, Dataset)],
    cfg: &MatrixConfig,
    results: Option<&Path>,
    resume: bool,
) -> Result<MatrixRun> {
    run_matrix_with_progress(pool, cfg, results, resume, &|_, _| {})
}

/// [`run_matrix`], calling `progress` with each cell and its index as it
/// is committed, in cell order.
pub fn run_matrix_with_progress(
    pool: &[(String, Dataset)],
    cfg: &MatrixConfig,
    results: Option<&Path>,
    resume: bool,
    progress: &(dyn Fn(&CellOutcome, usize) + Sync),
) -> Result<MatrixRun> {
    if pool.is_empty() {
        return Err(Error::Config("dataset pool is empty".into()));
    }
    if cfg.cells.is_empty() || cfg.models.is_empty() {
        return Err(Error::Config("need at least one model and one cell".into()));
    }
    let plan = Plan { pool, cfg };

    let (kept_rows, resumed) = match results {
        Some(path) if resume && path.exists() => read_completed(path, &plan)?,
        _ => (Vec::new(), Vec::new()),
    };
    let writer = match results {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(RESULTS_HEADER)?;
            for row in &kept_rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
            Some(w)
        }
        None => None,
    };

    let resumed_cells = resumed.len();
    let sink = Mutex::new(Sink {
        progress,
        writer,
        next: resumed_cells,
        buffered: BTreeMap::new(),
        done: resumed,
        error: None,
    });
    let pending: Vec<usize> = (resumed_cells..plan.len()).collect();
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    workers.install(|| {
        pending.par_iter().for_each(|&index| {
            let outcome = plan.run(index);
            sink.lock()
                .expect("results sink poisoned")
                .accept(index, outcome);
        });
    });

    let sink = sink.into_inner().expect("results sink poisoned");
    if let Some(e) = sink.error {
        return Err(e);
    }
    Ok(MatrixRun {
        outcomes: sink.done,
        resumed_cells,
    })
}

/// Builds the quality matrix of one model from a results CSV, using the
/// per-cell summary rows. Failed cells become missing entries.
pub fn quality_matrix_from_results(path: &Path, model: ModelFamily) -> Result<QualityMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Config(format!(
            "{} is not a results file",
            path.display()
        )));
    }
    let model_name = model.to_string();
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if &record[1] != model_name.as_str() || &record[5] != ALL_FOLDS {
            continue;
        }
        let cell = if &record[3] == NO_STRATEGY {
            record[2].to_string()
        } else {
            format!("{}+{}", &record[2], &record[3])
        };
        let q = if &record[8] == "ok" {
            Some(record[6].parse::<f64>().map_err(|_| Error::Parse {
                line: record.position().map_or(0, |p| p.line() as usize),
                message: format!("bad q_prc {:?}", &record[6]),
            })?)
        } else {
            None
        };
        entries.push((record[0].to_string(), cell, q));
    }
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "no completed {model_name} cells in {}",
            path.display()
        )));
    }
    Ok(quality_matrix_from(entries.into_iter()))
}
