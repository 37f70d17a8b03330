//! Random oversampling, random undersampling and SMOTE, each driven by a
//! resampling multiplier `m`: the imbalance ratio after resampling is
//! `IR(S) / m`, up to rounding of the element counts.
//!
//! Oversamplers add `round((m - 1) |C1|)` minor elements; the undersampler
//! drops `round(|C0| (m - 1) / m)` major elements. Rounding is half-to-even.
//! Multipliers above `IR(S)` would invert the imbalance and are rejected.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{squared_distance, Dataset, ElementId};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Ros,
    Rus,
    Smote,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::Ros, Method::Rus, Method::Smote];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Ros => "ros",
            Method::Rus => "rus",
            Method::Smote => "smote",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown resampling method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResamplingSpec {
    pub method: Method,
    pub multiplier: f64,
    pub smote_k: usize,
}

impl ResamplingSpec {
    pub fn none() -> Self {
        Self {
            method: Method::None,
            multiplier: 1.0,
            smote_k: DEFAULT_SMOTE_K,
        }
    }

    pub fn new(method: Method, multiplier: f64) -> Self {
        Self {
            method,
            multiplier,
            smote_k: DEFAULT_SMOTE_K,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.smote_k = k;
        self
    }

    /// Checks the spec on its own; the `m <= IR(S)` cap needs a dataset and
    /// is checked by [`resample`].
    pub fn validate(&self) -> Result<()> {
        let m = self.multiplier;
        if self.smote_k == 0 {
            return Err(Error::Config(
                "SMOTE neighbour count must be at least 1".into(),
            ));
        }
        let ok = match self.method {
            Method::None => m == 1.0,
            _ => m.is_finite() && m > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MultiplierOutOfRange {
                multiplier: m,
                cap: f64::NAN,
                fold: None,
            })
        }
    }
}

/// Origin of one ROS copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RosRecord {
    pub synth: ElementId,
    pub source: ElementId,
}

/// Origin of one SMOTE synthetic: `x = (1 - lambda) * seed + lambda * neighbor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoteRecord {
    pub synth: ElementId,
    pub seed: ElementId,
    pub neighbor: ElementId,
    pub lambda: f64,
}

pub type SmoteProvenance = Vec<SmoteRecord>;

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Provenance {
    #[default]
    None,
    Ros(Vec<RosRecord>),
    Smote(SmoteProvenance),
}

impl Provenance {
    /// Original elements each synthetic element was derived from.
    pub fn parents(&self) -> Vec<(ElementId, Vec<ElementId>)> {
        match self {
            Provenance::None => Vec::new(),
            Provenance::Ros(records) => records.iter().map(|r| (r.synth, vec![r.source])).collect(),
            Provenance::Smote(records) => records
                .iter()
                .map(|r| (r.synth, vec![r.seed, r.neighbor]))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Resampled {
    pub dataset: Dataset,
    pub provenance: Provenance,
}

pub fn oversample_count(minor: usize, multiplier: f64) -> usize {
    ((multiplier - 1.0) * minor as f64).round_ties_even() as usize
}

pub fn undersample_count(major: usize, multiplier: f64) -> usize {
    (major as f64 * (multiplier - 1.0) / multiplier).round_ties_even() as usize
}

fn check_multiplier(dataset: &Dataset, multiplier: f64) -> Result<()> {
    let cap = dataset.imbalance_ratio()?;
    if multiplier.is_finite() && multiplier > 1.0 && multiplier <= cap {
        Ok(())
    } else {
        Err(Error::MultiplierOutOfRange {
            multiplier,
            cap,
            fold: None,
        })
    }
}

pub fn resample(dataset: &Dataset, spec: &ResamplingSpec, seed: u64) -> Result<Resampled> {
    spec.validate()?;
    match spec.method {
        Method::None => {
            dataset.require_both_classes()?;
            Ok(Resampled {
                dataset: dataset.clone(),
                provenance: Provenance::None,
            })
        }
        Method::Ros => ros(dataset, spec.multiplier, seed),
        Method::Rus => rus(dataset, spec.multiplier, seed),
        Method::Smote => smote(dataset, spec.multiplier, spec.smote_k, seed),
    }
}

/// Random oversampling: appends copies of minor elements drawn uniformly
/// with replacement.
pub fn ros(dataset: &Dataset, multiplier: f64, seed: u64) -> Result<Resampled> {
    check_multiplier(dataset, multiplier)?;
    let minor = dataset.class_indices(1);
    let added = oversample_count(minor.len(), multiplier);
    let mut rng = rng::rng(seed);
    let mut out = dataset.clone();
    let mut records = Vec::with_capacity(added);
    for counter in (dataset.next_synth_counter()..).take(added) {
        let src = minor[rng.random_range(0..minor.len())];
        let synth = ElementId::Synth(counter);
        out.push_row(dataset.row(src), 1, synth);
        records.push(RosRecord {
            synth,
            source: dataset.ids()[src],
        });
    }
    Ok(Resampled {
        dataset: out,
        provenance: Provenance::Ros(records),
    })
}

/// Random undersampling: shuffles the major class and drops a prefix, so
/// every subset of the dropped size is equally likely.
pub fn rus(dataset: &Dataset, multiplier: f64, seed: u64) -> Result<Resampled> {
    check_multiplier(dataset, multiplier)?;
    let mut major = dataset.class_indices(0);
    let dropped = undersample_count(major.len(), multiplier);
    if dropped >= major.len() {
        return Err(Error::WouldEmptyMajority);
    }
    let mut rng = rng::rng(seed);
    major.shuffle(&mut rng);
    let mut keep = vec![true; dataset.len()];
    for &i in &major[..dropped] {
        keep[i] = false;
    }
    let kept: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    Ok(Resampled {
        dataset: dataset.subset(&kept),
        provenance: Provenance::None,
    })
}

/// Indices (into `minor`) of the `k` nearest minor elements of each minor
/// element under Euclidean distance, self excluded, ties to the lower
/// dataset index.
pub fn minor_neighbors(dataset: &Dataset, minor: &[usize], k: usize) -> Vec<Vec<usize>> {
    minor
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let mut cand: Vec<(f64, usize)> = minor
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &j)| (squared_distance(dataset.row(i), dataset.row(j)), b))
                .collect();
            // `minor` is ascending, so position order is dataset-index order.
            cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// SMOTE: each synthetic element lies on the segment between a uniformly
/// drawn minor element and one of its `min(k, |C1| - 1)` nearest minor
/// neighbours, at a uniform position `lambda` in `[0, 1]`.
pub fn smote(dataset: &Dataset, multiplier: f64, k: usize, seed: u64) -> Result<Resampled> {
    if k == 0 {
        return Err(Error::Config(
            "SMOTE neighbour count must be at least 1".into(),
        ));
    }
    let minor = dataset.class_indices(1);
    if minor.len() < 2 {
        return Err(Error::MinorityTooSmall(minor.len()));
    }
    check_multiplier(dataset, multiplier)?;
    let k_eff = k.min(minor.len() - 1);
    let neighbors = minor_neighbors(dataset, &minor, k_eff);

    let added = oversample_count(minor.len(), multiplier);
    let mut rng = rng::rng(seed);
    let mut out = dataset.clone();
    let mut records = Vec::with_capacity(added);
    let mut point = vec![0.0; dataset.n_features()];
    for counter in (dataset.next_synth_counter()..).take(added) {
        let a = rng.random_range(0..minor.len());
        let b = neighbors[a][rng.random_range(0..k_eff)];
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let (xi, xj) = (dataset.row(minor[a]), dataset.row(minor[b]));
        for (p, (u, v)) in point.iter_mut().zip(xi.iter().zip(xj)) {
            *p = (1.0 - lambda) * u + lambda * v;
        }
        let synth = ElementId::Synth(counter);
        out.push_row(&point, 1, synth);
        records.push(SmoteRecord {
            synth,
            seed: dataset.ids()[minor[a]],
            neighbor: dataset.ids()[minor[b]],
            lambda,
        });
    }
    Ok(Resampled {
        dataset: out,
        provenance: Provenance::Smote(records),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(zeros: usize, ones: usize, d: usize) -> Dataset {
        let n = zeros + ones;
        let labels = (0..n).map(|i| u8::from(i >= zeros)).collect();
        let features = (0..n * d).map(|v| (v as f64 * 0.37).sin()).collect();
        Dataset::new(features, d, labels).unwrap()
    }

    #[test]
    fn none_is_identity() {
        let ds = split(10, 3, 2);
        let out = resample(&ds, &ResamplingSpec::none(), 4).unwrap();
        assert_eq!(out.dataset, ds);
        assert_eq!(out.provenance, Provenance::None);
    }

    #[test]
    fn spec_validation() {
        assert!(ResamplingSpec::new(Method::None, 2.0).validate().is_err());
        assert!(ResamplingSpec::new(Method::Ros, 1.0).validate().is_err());
        assert!(ResamplingSpec::new(Method::Rus, f64::NAN)
            .validate()
            .is_err());
        assert!(ResamplingSpec::new(Method::Smote, 2.0)
            .with_k(0)
            .validate()
            .is_err());
        assert!(ResamplingSpec::new(Method::Smote, 2.0).validate().is_ok());
    }

    #[test]
    fn ros_doubles_minor() {
        let ds = split(100, 10, 3);
        let out = resample(&ds, &ResamplingSpec::new(Method::Ros, 2.0), 1).unwrap();
        assert_eq!(out.dataset.class_counts(), (100, 20));
        assert_eq!(out.dataset.imbalance_ratio().unwrap(), 5.0);
        let minor: Vec<&[f64]> = ds.class_indices(1).into_iter().map(|i| ds.row(i)).collect();
        for i in ds.len()..out.dataset.len() {
            assert!(minor.contains(&out.dataset.row(i)));
            assert!(out.dataset.ids()[i].is_synthetic());
        }
    }

    #[test]
    fn ros_rounds_count() {
        let ds = split(20, 4, 1);
        let out = ros(&ds, 1.25, 0).unwrap();
        assert_eq!(out.dataset.len(), 25);
    }

    #[test]
    fn rus_halves_major() {
        let ds = split(100, 10, 2);
        let out = resample(&ds, &ResamplingSpec::new(Method::Rus, 2.0), 9).unwrap();
        assert_eq!(out.dataset.class_counts(), (50, 10));
        assert_eq!(out.dataset.imbalance_ratio().unwrap(), 5.0);
        assert!(out.dataset.ids().iter().all(|id| ds.ids().contains(id)));
        for (row, id) in out.dataset.rows().zip(out.dataset.ids()) {
            let ElementId::Orig(i) = *id else { panic!() };
            assert_eq!(row, ds.row(i));
        }
    }

    #[test]
    fn multiplier_cap() {
        let balanced = split(10, 10, 1);
        assert!(matches!(
            rus(&balanced, 2.0, 0),
            Err(Error::MultiplierOutOfRange { .. })
        ));
        let ds = split(30, 10, 1);
        assert!(ros(&ds, 3.0, 0).is_ok());
        assert!(matches!(
            ros(&ds, 3.0001, 0),
            Err(Error::MultiplierOutOfRange { .. })
        ));
    }

    #[test]
    fn smote_needs_two_minor() {
        let ds = split(10, 1, 2);
        assert!(matches!(
            smote(&ds, 2.0, 5, 0),
            Err(Error::MinorityTooSmall(1))
        ));
    }

    #[test]
    fn smote_single_pair_lies_on_diagonal() {
        let features = vec![5.0, -5.0, 6.0, 7.0, 8.0, 9.0, 0.0, 0.0, 1.0, 1.0];
        let ds = Dataset::new(features, 2, vec![0, 0, 0, 1, 1]).unwrap();
        let out = smote(&ds, 1.5, 5, 3).unwrap();
        assert_eq!(out.dataset.len(), 6);
        let added = oversample_count(2, 1.5);
        assert_eq!(added, 1);
        let out = smote(
            &Dataset::new(
                vec![5.0, -5.0, 6.0, 7.0, 8.0, 9.0, 3.0, 3.0, 0.0, 0.0, 1.0, 1.0],
                2,
                vec![0, 0, 0, 0, 1, 1],
            )
            .unwrap(),
            2.0,
            5,
            3,
        )
        .unwrap();
        assert_eq!(out.dataset.len(), 8);
        for i in 6..8 {
            let r = out.dataset.row(i);
            assert_eq!(r[0], r[1]);
            assert!((0.0..=1.0).contains(&r[0]));
        }
    }

    #[test]
    fn smote_line_neighbors_match_brute_force() {
        let coords = [0.0, 1.0, 2.0, 3.0, 10.0];
        let mut features = vec![100.0; 6];
        features.extend(coords);
        let labels = [vec![0u8; 6], vec![1u8; 5]].concat();
        let ds = Dataset::new(features, 1, labels).unwrap();
        let minor = ds.class_indices(1);
        let nn = minor_neighbors(&ds, &minor, 2);
        // the point at 10 has neighbours at 3 and 2
        let far: Vec<f64> = nn[4].iter().map(|&b| ds.row(minor[b])[0]).collect();
        assert_eq!(far, vec![3.0, 2.0]);
        // exhaustive pairwise oracle
        for (a, list) in nn.iter().enumerate() {
            let mut all: Vec<(f64, usize)> = (0..5)
                .filter(|&b| b != a)
                .map(|b| ((coords[a] - coords[b]).abs(), b))
                .collect();
            all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let expect: Vec<usize> = all[..2].iter().map(|p| p.1).collect();
            assert_eq!(list, &expect);
        }
    }

    #[test]
    fn smote_provenance_reproduces_points() {
        let ds = split(40, 8, 3);
        let out = smote(&ds, 4.0, 3, 17).unwrap();
        let Provenance::Smote(records) = &out.provenance else {
            panic!()
        };
        assert_eq!(records.len(), 24);
        for (offset, rec) in records.iter().enumerate() {
            assert_ne!(rec.seed, rec.neighbor);
            let (ElementId::Orig(i), ElementId::Orig(j)) = (rec.seed, rec.neighbor) else {
                panic!()
            };
            assert_eq!(ds.labels()[i], 1);
            assert_eq!(ds.labels()[j], 1);
            let x = out.dataset.row(ds.len() + offset);
            for (c, xc) in x.iter().enumerate() {
                let expect = (1.0 - rec.lambda) * ds.row(i)[c] + rec.lambda * ds.row(j)[c];
                assert_eq!(*xc, expect);
            }
        }
    }

    #[test]
    fn synth_counters_continue() {
        let ds = split(40, 10, 2);
        let once = ros(&ds, 2.0, 1).unwrap().dataset;
        assert_eq!(once.next_synth_counter(), 10);
        let twice = smote(&once, 2.0, 5, 2).unwrap().dataset;
        assert_eq!(twice.class_counts(), (40, 40));
    }
}
