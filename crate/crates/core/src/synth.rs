//! Synthetic pools of imbalanced Gaussian-mixture datasets.
//!
//! Each dataset draws its dimension, size and minor-class fraction
//! uniformly from the configured ranges. Each class is a mixture of 1-3
//! Gaussian components: weights from a flat Dirichlet, means i.i.d.
//! `N(0, 3^2)` per coordinate, covariance `A Aᵀ + 0.5 I` with `A` a d×d
//! matrix of standard normals scaled by `1/sqrt(d)`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, CsvOptions, Dataset};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const MEAN_SCALE: f64 = 3.0;
const COV_RIDGE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoolConfig {
    pub pool_size: usize,
    pub seed: u64,
    pub components_per_class: [usize; 2],
    pub d_range: [usize; 2],
    pub size_range: [usize; 2],
    pub minor_fraction_range: [f64; 2],
}

impl GaussianPoolConfig {
    /// The artificial-pool ranges: 6-40 features, 200-1000 rows,
    /// minor fraction 0.05-0.35, up to 3 components per class.
    pub fn paper_defaults(pool_size: usize, seed: u64) -> Self {
        Self {
            pool_size,
            seed,
            components_per_class: [1, 3],
            d_range: [6, 40],
            size_range: [200, 1000],
            minor_fraction_range: [0.05, 0.35],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.pool_size == 0 {
            return err("pool_size must be positive");
        }
        let [c_lo, c_hi] = self.components_per_class;
        if c_lo < 1 || c_lo > c_hi || c_hi > 3 {
            return err("components_per_class must be a nonempty range within [1, 3]");
        }
        let [d_lo, d_hi] = self.d_range;
        if d_lo < 6 || d_lo > d_hi || d_hi > 40 {
            return err("d_range must be a nonempty range within [6, 40]");
        }
        let [n_lo, n_hi] = self.size_range;
        if n_lo < 200 || n_lo > n_hi || n_hi > 1000 {
            return err("size_range must be a nonempty range within [200, 1000]");
        }
        let [f_lo, f_hi] = self.minor_fraction_range;
        if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo < 0.05 || f_lo > f_hi || f_hi > 0.35 {
            return err("minor_fraction_range must be a nonempty range within [0.05, 0.35]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub name: String,
    pub seed: u64,
    pub minor_fraction: f64,
    pub dataset: Dataset,
}

pub fn generate_gaussian_pool(cfg: &GaussianPoolConfig) -> Result<Vec<GeneratedDataset>> {
    cfg.validate()?;
    (0..cfg.pool_size)
        .map(|t| {
            let seed = rng::sub_seed(cfg.seed, "gaussian-pool", t as u64);
            generate_one(cfg, seed).map(|(dataset, minor_fraction)| GeneratedDataset {
                name: format!("gauss_{t:04}"),
                seed,
                minor_fraction,
                dataset,
            })
        })
        .collect()
}

fn draw_usize(rng: &mut Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

fn generate_one(cfg: &GaussianPoolConfig, seed: u64) -> Result<(Dataset, f64)> {
    let mut rng = rng::rng(seed);
    let d = draw_usize(&mut rng, cfg.d_range);
    let n = draw_usize(&mut rng, cfg.size_range);
    let [f_lo, f_hi] = cfg.minor_fraction_range;
    let fraction = if f_lo == f_hi {
        f_lo
    } else {
        rng.random_range(f_lo..=f_hi)
    };
    let n_minor = ((n as f64 * fraction).round_ties_even() as usize).max(1);
    let n_major = n - n_minor;

    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(n);
    for (label, count) in [(0u8, n_major), (1u8, n_minor)] {
        let n_components = draw_usize(&mut rng, cfg.components_per_class);
        let mixture = Mixture::draw(&mut rng, d, n_components)?;
        for _ in 0..count {
            rows.push((mixture.sample(&mut rng), label));
        }
    }
    rows.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (row, label) in rows {
        features.extend(row);
        labels.push(label);
    }
    Ok((Dataset::new(features, d, labels)?, fraction))
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Component {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

struct Mixture {
    cumulative: Vec<f64>,
    components: Vec<Component>,
}

impl Mixture {
    fn draw(rng: &mut Rng, d: usize, n_components: usize) -> Result<Self> {
        let raw: Vec<f64> = (0..n_components)
            .map(|_| <Exp1 as Distribution<f64>>::sample(&Exp1, rng))
            .collect();
        let total: f64 = raw.iter().sum();
        let mut acc = 0.0;
        let cumulative = raw
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();

        let scale = 1.0 / (d as f64).sqrt();
        let components = (0..n_components)
            .map(|_| {
                let mean = DVector::from_fn(d, |_, _| MEAN_SCALE * normal(rng));
                let a = DMatrix::from_fn(d, d, |_, _| scale * normal(rng));
                let cov = &a * a.transpose() + DMatrix::identity(d, d) * COV_RIDGE;
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?
                    .unpack();
                Ok(Component { mean, chol })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cumulative,
            components,
        })
    }

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let which = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1);
        let comp = &self.components[which];
        let d = comp.mean.len();
        let z = DVector::from_fn(d, |_, _| normal(rng));
        let x = &comp.mean + &comp.chol * z;
        x.iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub minor_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub config: Option<GaussianPoolConfig>,
    pub datasets: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one CSV per dataset plus `manifest.json` into `dir`.
pub fn write_pool(
    dir: impl AsRef<Path>,
    cfg: &GaussianPoolConfig,
    pool: &[GeneratedDataset],
) -> Result<PoolManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut datasets = Vec::with_capacity(pool.len());
    for item in pool {
        let file = format!("{}.csv", item.name);
        dataset::save_csv(&item.dataset, dir.join(&file))?;
        datasets.push(ManifestEntry {
            file,
            seed: item.seed,
            d: item.dataset.n_features(),
            n: item.dataset.len(),
            minor_fraction: item.minor_fraction,
        });
    }
    let manifest = PoolManifest {
        config: Some(cfg.clone()),
        datasets,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads a pool from a manifest file, or from a directory (its manifest if
/// present, otherwise every `*.csv` in name order). Names are file stems.
pub fn read_pool(path: impl AsRef<Path>) -> Result<Vec<(String, Dataset)>> {
    let path = path.as_ref();
    let (dir, files): (PathBuf, Vec<String>) = if path.is_dir() {
        let manifest = path.join(MANIFEST_FILE);
        if manifest.exists() {
            (path.to_path_buf(), manifest_files(&manifest)?)
        } else {
            let mut files: Vec<String> = std::fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|entry| entry.ok())
                .map(|entry| entry.file_name().to_string_lossy().into_owned())
                .filter(|name| name.ends_with(".csv"))
                .collect();
            files.sort();
            (path.to_path_buf(), files)
        }
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (dir, manifest_files(path)?)
    };
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no datasets found in {}",
            path.display()
        )));
    }
    files
        .into_iter()
        .map(|file| {
            let ds = dataset::load_csv(dir.join(&file), &CsvOptions::default())?.dataset;
            let name = file.strip_suffix(".csv").unwrap_or(&file).to_string();
            Ok((name, ds))
        })
        .collect()
}

fn manifest_files(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: PoolManifest = serde_json::from_str(&text)?;
    Ok(manifest.datasets.into_iter().map(|e| e.file).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pinned() -> GaussianPoolConfig {
        GaussianPoolConfig {
            pool_size: 1,
            seed: 11,
            components_per_class: [1, 3],
            d_range: [6, 6],
            size_range: [200, 200],
            minor_fraction_range: [0.25, 0.25],
        }
    }

    #[test]
    fn degenerate_ranges_force_counts() {
        let pool = generate_gaussian_pool(&pinned()).unwrap();
        assert_eq!(pool.len(), 1);
        let ds = &pool[0].dataset;
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.n_features(), 6);
        assert_eq!(ds.class_counts(), (150, 50));
        assert_eq!(ds.imbalance_ratio().unwrap(), 3.0);
    }

    #[test]
    fn same_seed_same_pool() {
        let cfg = GaussianPoolConfig::paper_defaults(3, 99);
        let a = generate_gaussian_pool(&cfg).unwrap();
        let b = generate_gaussian_pool(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let xb: Vec<u64> = x.dataset.features().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.dataset.features().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
            assert_eq!(x.dataset.labels(), y.dataset.labels());
        }
        let other = generate_gaussian_pool(&GaussianPoolConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a[0].dataset.features(), other[0].dataset.features());
    }

    #[test]
    fn config_validation() {
        let bad = [
            GaussianPoolConfig {
                pool_size: 0,
                ..pinned()
            },
            GaussianPoolConfig {
                components_per_class: [0, 2],
                ..pinned()
            },
            GaussianPoolConfig {
                components_per_class: [2, 4],
                ..pinned()
            },
            GaussianPoolConfig {
                d_range: [8, 7],
                ..pinned()
            },
            GaussianPoolConfig {
                size_range: [100, 300],
                ..pinned()
            },
            GaussianPoolConfig {
                minor_fraction_range: [0.1, 0.5],
                ..pinned()
            },
        ];
        for cfg in bad {
            assert!(matches!(
                generate_gaussian_pool(&cfg),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn pool_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GaussianPoolConfig {
            pool_size: 2,
            ..pinned()
        };
        let pool = generate_gaussian_pool(&cfg).unwrap();
        let manifest = write_pool(dir.path(), &cfg, &pool).unwrap();
        assert_eq!(manifest.datasets[1].file, "gauss_0001.csv");
        let loaded = read_pool(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "gauss_0000");
        assert_eq!(loaded[0].1.features(), pool[0].dataset.features());
        let via_manifest = read_pool(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(via_manifest[1].1, loaded[1].1);
    }
}
