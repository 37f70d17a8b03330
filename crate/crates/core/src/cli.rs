//! Command-line front end: `generate`, `resample`, `evaluate`,
//! `benchmark` and `curves`.
//!
//! Every artifact gets a `run.json` echo next to it holding the resolved
//! configuration and tool version. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 benchmark finished with failed cells.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Serialize, Serializer};

use crate::benchmark::{self, Cell, CurveFormat, MatrixConfig};
use crate::classifiers::{ModelFamily, ModelSpec};
use crate::dataset::{self, CsvOptions, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::cv::{self, Strategy, DEFAULT_CVS_GRID, DEFAULT_FOLDS};
use crate::resampling::{self, Method, Provenance, ResamplingSpec, DEFAULT_SMOTE_K};
use crate::synth::{self, GaussianPoolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CELL_ERRORS: i32 = 3;

pub const RUN_ECHO_FILE: &str = "run.json";

#[derive(Parser, Debug)]
#[command(
    name = "rebalance",
    version,
    about = "Resampling benchmarks for imbalanced binary classification"
)]
struct Cli {
    /// More progress output on stderr (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Resolve relative output paths against this directory.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Generate a pool of Gaussian-mixture datasets.
    Generate(GenerateArgs),
    /// Resample one dataset.
    Resample(ResampleArgs),
    /// Cross-validate one (model, method, strategy) combination.
    Evaluate(EvaluateArgs),
    /// Run the dataset × model × cell matrix into a results CSV.
    Benchmark(BenchmarkArgs),
    /// Dolan-More curves from a results CSV.
    Curves(CurvesArgs),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the CSVs and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub d_min: usize,
    #[arg(long, default_value_t = 40)]
    pub d_max: usize,
    #[arg(long, default_value_t = 200)]
    pub size_min: usize,
    #[arg(long, default_value_t = 1000)]
    pub size_max: usize,
    #[arg(long, default_value_t = 0.05)]
    pub minor_min: f64,
    #[arg(long, default_value_t = 0.35)]
    pub minor_max: f64,
    #[arg(long, default_value_t = 3)]
    pub components_max: usize,
}

impl GenerateArgs {
    pub fn pool_config(&self) -> GaussianPoolConfig {
        GaussianPoolConfig {
            pool_size: self.pool_size,
            seed: self.seed,
            components_per_class: [1, self.components_max],
            d_range: [self.d_min, self.d_max],
            size_range: [self.size_min, self.size_max],
            minor_fraction_range: [self.minor_min, self.minor_max],
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct InputArgs {
    /// Input dataset CSV.
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Swap labels when 1 is the majority class instead of failing.
    #[arg(long)]
    pub relabel: bool,
}

impl InputArgs {
    fn load(&self, verbosity: u8) -> Result<Dataset> {
        let options = CsvOptions {
            label_column: self.label_column.clone(),
            relabel: self.relabel,
        };
        let loaded = dataset::load_csv(&self.input, &options)?;
        if loaded.relabeled {
            note(
                verbosity,
                0,
                format_args!(
                    "{}: labels swapped so that 1 is the minor class",
                    self.input.display()
                ),
            );
        }
        Ok(loaded.dataset)
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct ResampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_resampling_method)]
    #[serde(serialize_with = "display")]
    pub method: Method,
    #[arg(long, value_parser = parse_multiplier)]
    pub multiplier: f64,
    /// SMOTE neighbour count.
    #[arg(long, default_value_t = DEFAULT_SMOTE_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sidecar CSV with the origin of every synthetic element.
    #[arg(long, value_name = "CSV")]
    pub provenance: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "tree")]
    #[serde(serialize_with = "display")]
    pub model: ModelFamily,
    #[arg(long, default_value = "none")]
    #[serde(serialize_with = "display")]
    pub method: Method,
    /// fixed:<m>, eqs, cvs or cvs-nested.
    #[arg(long)]
    #[serde(serialize_with = "display_opt")]
    pub strategy: Option<Strategy>,
    /// Shorthand for --strategy fixed:<m>.
    #[arg(long, value_parser = parse_multiplier, conflicts_with = "strategy")]
    #[serde(skip)]
    pub multiplier: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SMOTE_K)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CVS_GRID.to_vec())]
    pub cvs_grid: Vec<f64>,
    /// JSON report.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkArgs {
    /// Pool manifest or directory.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "tree,knn,logreg")]
    #[serde(serialize_with = "display_list")]
    pub models: Vec<ModelFamily>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "none,ros+eqs,ros+cvs,rus+eqs,rus+cvs,smote+eqs,smote+cvs"
    )]
    #[serde(serialize_with = "display_list")]
    pub cells: Vec<Cell>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SMOTE_K)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CVS_GRID.to_vec())]
    pub cvs_grid: Vec<f64>,
    /// Results CSV.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    /// Keep completed cells of an existing results file.
    #[arg(long)]
    pub resume: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl BenchmarkArgs {
    pub fn matrix_config(&self) -> MatrixConfig {
        MatrixConfig {
            models: self.models.clone(),
            cells: self.cells.clone(),
            folds: self.folds,
            seed: self.seed,
            smote_k: self.k,
            cvs_grid: self.cvs_grid.clone(),
            jobs: self.jobs,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize)]
pub struct CurvesArgs {
    #[arg(long, value_name = "CSV")]
    pub results: PathBuf,
    #[arg(long, default_value = "tree")]
    #[serde(serialize_with = "display")]
    pub model: ModelFamily,
    /// Restrict to these cells, in this order.
    #[arg(long, value_delimiter = ',')]
    #[serde(serialize_with = "display_list")]
    pub cells: Vec<Cell>,
    #[arg(long, default_value = "svg", value_parser = parse_format)]
    pub format: String,
    #[arg(long, default_value_t = benchmark::profile::DEFAULT_BETA_POINTS)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub verbosity: u8,
    pub out_dir: Option<PathBuf>,
    pub command: Command,
}

impl RunConfig {
    pub fn seed(&self) -> Option<u64> {
        match &self.command {
            Command::Generate(a) => Some(a.seed),
            Command::Resample(a) => Some(a.seed),
            Command::Evaluate(a) => Some(a.seed),
            Command::Benchmark(a) => Some(a.seed),
            Command::Curves(_) => None,
        }
    }
}

fn display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_opt<T: fmt::Display, S: Serializer>(
    v: &Option<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

fn display_list<T: fmt::Display, S: Serializer>(
    v: &[T],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn parse_multiplier(s: &str) -> std::result::Result<f64, String> {
    let m: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(m.is_finite() && m > 1.0) {
        return Err("multiplier must exceed 1".into());
    }
    Ok(m)
}

fn parse_resampling_method(s: &str) -> std::result::Result<Method, String> {
    match s.parse::<Method>() {
        Ok(Method::None) | Err(_) => Err("expected ros, rus or smote".into()),
        Ok(m) => Ok(m),
    }
}

fn parse_format(s: &str) -> std::result::Result<String, String> {
    s.parse::<CurveFormat>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn usage(flag: &str, message: &str) -> Error {
    Error::Usage(format!("{flag}: {message}"))
}

fn resolve(out_dir: &Option<PathBuf>, path: &mut PathBuf) {
    if let Some(dir) = out_dir {
        if path.is_relative() {
            *path = dir.join(&*path);
        }
    }
}

fn validate(cli: Cli) -> Result<RunConfig> {
    let Cli {
        verbose,
        out_dir,
        mut command,
    } = cli;
    match &mut command {
        Command::Generate(a) => {
            resolve(&out_dir, &mut a.out);
            a.pool_config()
                .validate()
                .map_err(|e| Error::Usage(e.to_string()))?;
        }
        Command::Resample(a) => {
            resolve(&out_dir, &mut a.out);
            if let Some(p) = a.provenance.as_mut() {
                resolve(&out_dir, p);
            }
            if a.k == 0 {
                return Err(usage("--k", "must be positive"));
            }
            if a.provenance.is_some() && a.method == Method::Rus {
                return Err(usage("--provenance", "rus creates no synthetic elements"));
            }
        }
        Command::Evaluate(a) => {
            resolve(&out_dir, &mut a.out);
            if let Some(m) = a.multiplier.take() {
                a.strategy = Some(Strategy::Fixed(m));
            }
            match (a.method, a.strategy) {
                (Method::None, Some(_)) => {
                    return Err(usage("--strategy", "not used with --method none"))
                }
                (Method::None, None) => {}
                (_, None) => a.strategy = Some(Strategy::Eqs),
                _ => {}
            }
            check_common(a.folds, a.k, &a.cvs_grid)?;
        }
        Command::Benchmark(a) => {
            resolve(&out_dir, &mut a.out);
            check_common(a.folds, a.k, &a.cvs_grid)?;
            if a.models.is_empty() {
                return Err(usage("--models", "needs at least one model"));
            }
            if a.cells.is_empty() {
                return Err(usage("--cells", "needs at least one cell"));
            }
            if a.jobs == 0 {
                return Err(usage("--jobs", "must be positive"));
            }
        }
        Command::Curves(a) => {
            resolve(&out_dir, &mut a.out);
            if a.points < 2 {
                return Err(usage("--points", "needs at least 2"));
            }
        }
    }
    Ok(RunConfig {
        verbosity: verbose,
        out_dir,
        command,
    })
}

fn check_common(folds: usize, k: usize, grid: &[f64]) -> Result<()> {
    if folds < 2 {
        return Err(usage("--folds", "must be at least 2"));
    }
    if k == 0 {
        return Err(usage("--k", "must be positive"));
    }
    if grid.is_empty() || grid.iter().any(|m| !(m.is_finite() && *m > 1.0)) {
        return Err(usage("--cvs-grid", "multipliers must exceed 1"));
    }
    Ok(())
}

/// Parses and validates a command line; `argv[0]` is the program name.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.render().to_string()))?;
    validate(cli)
}

fn note(verbosity: u8, level: u8, message: fmt::Arguments<'_>) {
    if verbosity >= level {
        eprintln!("{message}");
    }
}

#[derive(Serialize)]
struct RunEcho<'a> {
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config: &'a RunConfig,
}

/// Writes `run.json` into `dir`, or `<file>.run.json` next to a file.
fn write_echo(cfg: &RunConfig, artifact: &Path, is_dir: bool) -> Result<PathBuf> {
    let path = if is_dir {
        artifact.join(RUN_ECHO_FILE)
    } else {
        let mut name = artifact.file_name().map(OsString::from).unwrap_or_default();
        name.push(".");
        name.push(RUN_ECHO_FILE);
        artifact.with_file_name(name)
    };
    let echo = RunEcho {
        tool: "rebalance",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&echo)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Runs a validated configuration and returns the exit code.
pub fn execute(cfg: &RunConfig) -> Result<i32> {
    let v = cfg.verbosity;
    match &cfg.command {
        Command::Generate(a) => {
            let pool_cfg = a.pool_config();
            let pool = synth::generate_gaussian_pool(&pool_cfg)?;
            synth::write_pool(&a.out, &pool_cfg, &pool)?;
            write_echo(cfg, &a.out, true)?;
            note(
                v,
                1,
                format_args!("wrote {} datasets to {}", pool.len(), a.out.display()),
            );
        }
        Command::Resample(a) => {
            let data = a.input.load(v)?;
            let spec = ResamplingSpec::new(a.method, a.multiplier).with_k(a.k);
            let out = resampling::resample(&data, &spec, a.seed)?;
            create_parent(&a.out)?;
            dataset::save_csv(&out.dataset, &a.out)?;
            if let Some(path) = &a.provenance {
                write_provenance(path, &out.provenance)?;
            }
            write_echo(cfg, &a.out, false)?;
            let (major, minor) = out.dataset.class_counts();
            note(
                v,
                1,
                format_args!("{} rows: {major} major, {minor} minor", out.dataset.len()),
            );
        }
        Command::Evaluate(a) => {
            let data = a.input.load(v)?;
            let model = ModelSpec::default_for(a.model, a.seed);
            let strategy = a.strategy.unwrap_or(Strategy::Eqs);
            let eval = cv::evaluate(
                &data,
                a.method,
                strategy,
                a.k,
                &model,
                &a.cvs_grid,
                a.folds,
                a.seed,
            )?;
            create_parent(&a.out)?;
            let text = serde_json::to_string_pretty(&eval)? + "\n";
            std::fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
            write_echo(cfg, &a.out, false)?;
            note(v, 0, format_args!("Q_cv = {}", eval.report.q_cv));
        }
        Command::Benchmark(a) => {
            let pool = synth::read_pool(&a.pool)?;
            let mcfg = a.matrix_config();
            let total = benchmark::cell_count(pool.len(), &mcfg);
            create_parent(&a.out)?;
            let progress = |o: &benchmark::CellOutcome, index: usize| {
                note(
                    v,
                    1,
                    format_args!(
                        "[{}/{total}] {} {} {}: {}",
                        index + 1,
                        o.dataset,
                        o.model,
                        o.cell,
                        o.status
                    ),
                );
            };
            let run = benchmark::run_matrix_with_progress(
                &pool,
                &mcfg,
                Some(&a.out),
                a.resume,
                &progress,
            )?;
            write_echo(cfg, &a.out, false)?;
            let errors = run.error_cells();
            note(
                v,
                0,
                format_args!(
                    "{total} cells ({} resumed), {errors} failed; results in {}",
                    run.resumed_cells,
                    a.out.display()
                ),
            );
            if errors > 0 {
                return Ok(EXIT_CELL_ERRORS);
            }
        }
        Command::Curves(a) => {
            let mut q = benchmark::quality_matrix_from_results(&a.results, a.model)?;
            if !a.cells.is_empty() {
                let names: Vec<String> = a.cells.iter().map(Cell::to_string).collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                q = q.select(&names)?;
            }
            let betas = benchmark::default_beta_grid(&q, a.points)?;
            let profile = benchmark::dolan_more(&q, &betas)?;
            note(
                v,
                0,
                format_args!(
                    "{} datasets compared, {} dropped for missing cells",
                    profile.retained_rows, profile.dropped_rows
                ),
            );
            let text = benchmark::emit_curves(&profile.curves, a.format.parse()?)?;
            create_parent(&a.out)?;
            std::fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
            write_echo(cfg, &a.out, false)?;
        }
    }
    Ok(EXIT_OK)
}

fn write_provenance(path: &Path, provenance: &Provenance) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    match provenance {
        Provenance::Smote(records) => {
            w.write_record(["synth_id", "seed_id", "neighbor_id", "lambda"])?;
            for r in records {
                w.write_record([
                    r.synth.to_string(),
                    r.seed.to_string(),
                    r.neighbor.to_string(),
                    r.lambda.to_string(),
                ])?;
            }
        }
        Provenance::Ros(records) => {
            w.write_record(["synth_id", "source_id"])?;
            for r in records {
                w.write_record([r.synth.to_string(), r.source.to_string()])?;
            }
        }
        Provenance::None => {}
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Full command-line entry point: parse, run, report. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = write!(std::io::stdout(), "{}", e.render());
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{}", e.render());
            return EXIT_USAGE;
        }
    };
    let outcome = validate(cli).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_maps_directly() {
        let cfg = parse_args([
            "rebalance",
            "generate",
            "--pool-size",
            "10",
            "--seed",
            "7",
            "--out",
            "pool/",
        ])
        .unwrap();
        let Command::Generate(g) = &cfg.command else {
            panic!()
        };
        assert_eq!((g.pool_size, g.seed), (10, 7));
        assert_eq!(g.out, PathBuf::from("pool/"));
    }

    #[test]
    fn multiplier_must_exceed_one() {
        let err = parse_args([
            "rebalance",
            "evaluate",
            "--in",
            "a.csv",
            "--out",
            "r.json",
            "--method",
            "ros",
            "--multiplier",
            "0.5",
        ])
        .unwrap_err();
        assert!(
            matches!(&err, Error::Usage(m) if m.contains("--multiplier") && m.contains("exceed 1"))
        );
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn benchmark_needs_pool() {
        let err = parse_args(["rebalance", "benchmark", "--out", "r.csv"]).unwrap_err();
        assert!(matches!(&err, Error::Usage(m) if m.contains("--pool")));
    }

    #[test]
    fn unknown_flag_rejected() {
        let err = parse_args([
            "rebalance",
            "curves",
            "--results",
            "r.csv",
            "--out",
            "f.svg",
            "--colour",
        ])
        .unwrap_err();
        assert!(matches!(&err, Error::Usage(m) if m.contains("--colour")));
    }

    #[test]
    fn evaluate_defaults() {
        let cfg = parse_args([
            "rebalance",
            "evaluate",
            "--in",
            "a.csv",
            "--out",
            "r.json",
            "--method",
            "smote",
        ])
        .unwrap();
        let Command::Evaluate(e) = &cfg.command else {
            panic!()
        };
        assert_eq!(e.strategy, Some(Strategy::Eqs));
        assert_eq!(e.folds, 10);
        assert_eq!(e.k, 5);
        let cfg = parse_args([
            "rebalance",
            "evaluate",
            "--in",
            "a.csv",
            "--out",
            "r.json",
            "--method",
            "rus",
            "--multiplier",
            "2",
        ])
        .unwrap();
        let Command::Evaluate(e) = &cfg.command else {
            panic!()
        };
        assert_eq!(e.strategy, Some(Strategy::Fixed(2.0)));
    }

    #[test]
    fn out_dir_prefixes_relative_paths() {
        let cfg = parse_args([
            "rebalance",
            "--out-dir",
            "runs",
            "curves",
            "--results",
            "r.csv",
            "--out",
            "f.svg",
        ])
        .unwrap();
        let Command::Curves(c) = &cfg.command else {
            panic!()
        };
        assert_eq!(c.out, PathBuf::from("runs/f.svg"));
        assert_eq!(c.results, PathBuf::from("r.csv"));
    }

    #[test]
    fn echo_is_plain_json() {
        let cfg = parse_args([
            "rebalance",
            "benchmark",
            "--pool",
            "p",
            "--out",
            "r.csv",
            "--models",
            "tree",
        ])
        .unwrap();
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["command"]["subcommand"], "benchmark");
        assert_eq!(v["command"]["cells"][1], "ros+eqs");
        assert_eq!(v["command"]["models"][0], "tree");
    }
}
