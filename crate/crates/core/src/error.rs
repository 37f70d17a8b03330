use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class} has no elements")]
    EmptyClass { class: u8 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: label {value:?} is not 0 or 1")]
    Label { line: usize, value: String },

    #[error("class 1 is the majority ({ones} ones vs {zeros} zeros); pass the relabel flag to flip labels")]
    MajorityMislabeled { ones: usize, zeros: usize },

    #[error("class {class} has {count} elements, fewer than the {folds} folds requested")]
    TooFewElements {
        class: u8,
        count: usize,
        folds: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("multiplier {multiplier} outside (1, {cap}]{}", fold.map(|f| format!(" in fold {f}")).unwrap_or_default())]
    MultiplierOutOfRange {
        multiplier: f64,
        cap: f64,
        fold: Option<usize>,
    },

    #[error("SMOTE needs at least 2 minor-class elements, found {0}")]
    MinorityTooSmall(usize),

    #[error("undersampling would leave the major class empty")]
    WouldEmptyMajority,

    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no positive labels")]
    NoPositives,

    #[error("no grid multiplier lies in (1, {cap}]")]
    EmptyGrid { cap: f64 },

    #[error("every row has a missing cell for some compared method")]
    NoComparableRows,

    #[error("curves do not share a beta grid")]
    MismatchedGrids,

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag written to the status column of results files.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::EmptyClass { .. } => "EmptyClass",
            Error::Parse { .. } => "ParseError",
            Error::Label { .. } => "LabelError",
            Error::MajorityMislabeled { .. } => "MajorityMislabeled",
            Error::TooFewElements { .. } => "TooFewElements",
            Error::Config(_) => "ConfigError",
            Error::MultiplierOutOfRange { .. } => "MultiplierOutOfRange",
            Error::MinorityTooSmall(_) => "MinorityTooSmall",
            Error::WouldEmptyMajority => "WouldEmptyMajority",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoPositives => "NoPositives",
            Error::EmptyGrid { .. } => "EmptyGrid",
            Error::NoComparableRows => "NoComparableRows",
            Error::MismatchedGrids => "MismatchedGrids",
            Error::Usage(_) => "UsageError",
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
