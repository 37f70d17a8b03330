//! Labelled datasets with element provenance, CSV interchange and
//! stratified fold splitting.
//!
//! Label `1` is always the minor class. Every element carries an
//! [`ElementId`]: rows read from disk or generated are `orig:<index>`,
//! rows created by oversampling are `synth:<counter>`. Subsets keep the ids
//! of the rows they select, which is what makes leakage audits possible.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementId {
    Orig(usize),
    Synth(usize),
}

impl ElementId {
    pub fn is_synthetic(self) -> bool {
        matches!(self, ElementId::Synth(_))
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementId::Orig(i) => write!(f, "orig:{i}"),
            ElementId::Synth(i) => write!(f, "synth:{i}"),
        }
    }
}

impl FromStr for ElementId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            message: format!("bad element id {s:?}"),
        };
        let (kind, num) = s.split_once(':').ok_or_else(bad)?;
        let num: usize = num.parse().map_err(|_| bad())?;
        match kind {
            "orig" => Ok(ElementId::Orig(num)),
            "synth" => Ok(ElementId::Synth(num)),
            _ => Err(bad()),
        }
    }
}

/// Row-major feature matrix with binary labels and per-row ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    ids: Vec<ElementId>,
}

impl Dataset {
    /// Builds a dataset whose rows get ids `orig:0 .. orig:{n-1}`.
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<u8>) -> Result<Self> {
        let ids = (0..labels.len()).map(ElementId::Orig).collect();
        Self::with_ids(features, n_features, labels, ids)
    }

    pub fn with_ids(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        ids: Vec<ElementId>,
    ) -> Result<Self> {
        if n_features == 0 || labels.is_empty() {
            return Err(Error::Config(
                "dataset needs at least one row and one feature".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if ids.len() != labels.len() {
            return Err(Error::Config("ids and labels differ in length".into()));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite feature in row {}",
                pos / n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Label {
                line: 0,
                value: bad.to_string(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Config(format!("duplicate element id {dup}")));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn ids(&self) -> &[ElementId] {
        &self.ids
    }

    /// `(|C0|, |C1|)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    pub fn class_indices(&self, class: u8) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    /// |C0| / |C1|.
    pub fn imbalance_ratio(&self) -> Result<f64> {
        let (zeros, ones) = self.class_counts();
        if zeros == 0 {
            return Err(Error::EmptyClass { class: 0 });
        }
        if ones == 0 {
            return Err(Error::EmptyClass { class: 1 });
        }
        Ok(zeros as f64 / ones as f64)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        self.imbalance_ratio().map(|_| ())
    }

    /// Rows at `indices`, in that order, keeping their ids.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    /// First unused `synth:` counter.
    pub fn next_synth_counter(&self) -> usize {
        self.ids
            .iter()
            .filter_map(|id| match id {
                ElementId::Synth(c) => Some(c + 1),
                ElementId::Orig(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Appends a row; callers guarantee the id is fresh and values finite.
    pub(crate) fn push_row(&mut self, row: &[f64], label: u8, id: ElementId) {
        debug_assert_eq!(row.len(), self.n_features);
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.ids.push(id);
    }

    /// Swaps labels 0 and 1 in place.
    pub fn flip_labels(&mut self) {
        for l in &mut self.labels {
            *l = 1 - *l;
        }
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub label_column: String,
    /// Flip labels when class 1 is the majority instead of failing.
    pub relabel: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            relabel: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub relabeled: bool,
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let label_col = header
        .iter()
        .position(|h| h.trim() == options.label_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("no column named {:?}", options.label_column),
        })?;
    let n_features = header.len() - 1;
    if n_features == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if col == label_col {
                labels.push(match cell {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::Label {
                            line,
                            value: other.to_string(),
                        })
                    }
                });
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value {cell:?}"),
                    });
                }
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let mut dataset = Dataset::new(features, n_features, labels)?;
    let (zeros, ones) = dataset.class_counts();
    let mut relabeled = false;
    if ones > zeros {
        if !options.relabel {
            return Err(Error::MajorityMislabeled { ones, zeros });
        }
        dataset.flip_labels();
        relabeled = true;
    }
    dataset.require_both_classes()?;
    Ok(LoadedCsv { dataset, relabeled })
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

/// Writes `f0,...,f{d-1},label`. Floats use the shortest representation
/// that parses back to the same bits.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..dataset.n_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(dataset.n_features() + 1);
    for (row, label) in dataset.rows().zip(dataset.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(label.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// One cross-validation split, as sorted row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split: each class is shuffled and dealt round-robin,
/// so per-fold counts of either class differ by at most one.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = rng::rng(seed);
    let mut assignment = vec![0usize; dataset.len()];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut members = dataset.class_indices(class);
        if members.len() < k {
            return Err(Error::TooFewElements {
                class,
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = (offset + pos) % k;
        }
        // Continue dealing where this class stopped so fold sizes stay even.
        offset = (offset + members.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}
