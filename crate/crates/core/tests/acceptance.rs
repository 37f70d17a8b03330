//! Acceptance criteria 1-9. Each test prints one `criterion N ... PASS|FAIL`
//! line before asserting. Tolerances are the constants below.

mod common;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rebalance::benchmark::{self, default_cells, MatrixConfig, MatrixRun, QualityMatrix};
use rebalance::classifiers::logreg::{logreg_objective_and_gradient, solve, SolverOptions};
use rebalance::classifiers::ModelFamily;
use rebalance::dataset::squared_distance;
use rebalance::evaluation::cv::select_multiplier_eqs;
use rebalance::resampling::{oversample_count, undersample_count, Provenance};
use rebalance::synth::{generate_gaussian_pool, GaussianPoolConfig};
use rebalance::{pr_auc, resample, stratified_kfold, Dataset, ElementId, Method, ResamplingSpec};

const RESAMPLING_INSTANCES: usize = 600;
const SMOTE_INSTANCES: usize = 150;
const SEGMENT_TOL: f64 = 1e-9;
const PRAUC_CASES: usize = 1000;
const PRAUC_TOL: f64 = 1e-12;
const GRADIENT_PROBLEMS: usize = 50;
const GRADIENT_REL_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const LEAKAGE_DATASETS: usize = 20;
const PROFILE_MATRICES: usize = 100;
const PROFILE_TOL: f64 = 1e-15;
const DIRECTIONAL_POOL: usize = 60;
const DIRECTIONAL_BETA: f64 = 1.05;
const QUICK_LIMIT: Duration = Duration::from_secs(60);
const BENCHMARK_LIMIT: Duration = Duration::from_secs(30 * 60);

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} {name}: {verdict} ({detail})");
}

#[test]
fn criterion_1_resampling_contracts() {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut failures = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..RESAMPLING_INSTANCES {
        let ds = common::random_dataset(&mut rng, 200, false);
        let (major, minor) = ds.class_counts();
        let ir = ds.imbalance_ratio().unwrap();
        let m = common::random_multiplier(&mut rng, ir);
        let method = [Method::Ros, Method::Rus, Method::Smote][i % 3];
        let out = resample(&ds, &ResamplingSpec::new(method, m), i as u64).unwrap();
        let (major2, minor2) = out.dataset.class_counts();
        let expected = match method {
            Method::Rus => (major - undersample_count(major, m), minor),
            _ => (major, minor + oversample_count(minor, m)),
        };
        // independent restatement of the count formulas
        let formula = match method {
            Method::Rus => (
                major - (major as f64 * (m - 1.0) / m).round_ties_even() as usize,
                minor,
            ),
            _ => (
                major,
                minor + ((m - 1.0) * minor as f64).round_ties_even() as usize,
            ),
        };
        if (major2, minor2) != expected || expected != formula {
            failures.push(format!(
                "{method} m={m}: got {:?}, want {:?}",
                (major2, minor2),
                formula
            ));
            continue;
        }
        // IR moves by at most one element's worth away from IR/m
        let bound = match method {
            Method::Rus => 1.0 / minor as f64,
            _ => major as f64 / (minor2 as f64 * (minor2 as f64 - 1.0)),
        };
        let err = (major2 as f64 / minor2 as f64 - ir / m).abs();
        worst_excess = worst_excess.max(err - bound);
        if err > bound {
            failures.push(format!("{method} m={m}: |IR' - IR/m| = {err} > {bound}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < QUICK_LIMIT;
    report(
        1,
        "resampling contracts",
        pass,
        &format!(
            "{RESAMPLING_INSTANCES} instances, {} failures, worst err-bound {worst_excess:.3e}, {elapsed:.1?}",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

fn distance_to_segment(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let ax: Vec<f64> = a.iter().zip(x).map(|(p, q)| q - p).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ab.iter().zip(&ax).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    let proj: Vec<f64> = a.iter().zip(&ab).map(|(p, v)| p + t * v).collect();
    squared_distance(x, &proj).sqrt()
}

#[test]
fn criterion_2_smote_geometry() {
    let start = Instant::now();
    let mut rng = common::rng(202);
    let mut failures = Vec::new();
    let mut synthetics = 0;
    let mut worst = 0.0f64;
    for i in 0..SMOTE_INSTANCES {
        let ds = common::random_dataset(&mut rng, 120, i % 2 == 0);
        let ir = ds.imbalance_ratio().unwrap();
        let m = common::random_multiplier(&mut rng, ir);
        let k = rng.random_range(1..=7);
        let out = resample(
            &ds,
            &ResamplingSpec::new(Method::Smote, m).with_k(k),
            i as u64,
        )
        .unwrap();
        let Provenance::Smote(records) = &out.provenance else {
            panic!("smote without provenance")
        };
        let minor = ds.class_indices(1);
        let k_eff = k.min(minor.len() - 1);
        let row_of = |id: ElementId| match id {
            ElementId::Orig(r) => r,
            ElementId::Synth(_) => panic!("synthetic parent {id}"),
        };
        for rec in records {
            synthetics += 1;
            let seed = row_of(rec.seed);
            let neighbor = row_of(rec.neighbor);
            // brute force: distance of the k_eff-th nearest other minor element
            let mut dists: Vec<f64> = minor
                .iter()
                .filter(|&&j| j != seed)
                .map(|&j| squared_distance(ds.row(seed), ds.row(j)))
                .collect();
            dists.sort_by(f64::total_cmp);
            let kth = dists[k_eff - 1];
            let nd = squared_distance(ds.row(seed), ds.row(neighbor));
            if ds.labels()[seed] != 1 || ds.labels()[neighbor] != 1 || neighbor == seed || nd > kth
            {
                failures.push(format!(
                    "instance {i}: {} -> {} is not a k_eff-neighbour",
                    rec.seed, rec.neighbor
                ));
                continue;
            }
            let pos = out
                .dataset
                .ids()
                .iter()
                .position(|&id| id == rec.synth)
                .unwrap();
            let dist = distance_to_segment(out.dataset.row(pos), ds.row(seed), ds.row(neighbor));
            worst = worst.max(dist);
            if dist > SEGMENT_TOL || !(0.0..=1.0).contains(&rec.lambda) {
                failures.push(format!("instance {i}: {} off segment by {dist}", rec.synth));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && synthetics > 0 && elapsed < QUICK_LIMIT;
    report(
        2,
        "SMOTE geometry",
        pass,
        &format!(
            "{SMOTE_INSTANCES} instances, {synthetics} synthetics, max segment distance {worst:.2e}, {} failures, {elapsed:.1?}",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_prauc_oracle() {
    let mut rng = common::rng(303);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < PRAUC_CASES {
        let n = rng.random_range(1..=200);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        if !labels.contains(&1) {
            continue;
        }
        // coarse scores on every other case to force ties
        let coarse = cases % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    f64::from(rng.random_range(0..5u8)) / 4.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let got = pr_auc(&scores, &labels).unwrap();
        worst = worst.max((got - common::pr_auc_oracle(&scores, &labels)).abs());
        cases += 1;
    }

    let mut exact = true;
    for n in [1usize, 2, 7, 10, 33, 200] {
        for positives in 1..=n.min(12) {
            let labels: Vec<u8> = (0..n).map(|i| u8::from(i < positives)).collect();
            let perfect: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
            exact &= pr_auc(&perfect, &labels).unwrap() == 1.0;
            let prevalence = positives as f64 / n as f64;
            exact &= pr_auc(&vec![0.5; n], &labels).unwrap() == prevalence;
        }
    }
    let pass = worst <= PRAUC_TOL && exact;
    report(
        3,
        "PR-AUC oracle equivalence",
        pass,
        &format!("{PRAUC_CASES} cases, max |diff| {worst:.2e}, exact endpoints {exact}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_logreg_gradient_and_descent() {
    let mut rng = common::rng(404);
    let mut worst = 0.0f64;
    let mut monotone = true;
    for _ in 0..GRADIENT_PROBLEMS {
        let n = rng.random_range(5..60);
        let d = rng.random_range(1..8);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        y[0] = 1;
        y[1] = 0;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let (_, grad) = logreg_objective_and_gradient(&w, b, 0.0, &x, &y);
        let f = |w: &[f64], b: f64| logreg_objective_and_gradient(w, b, 0.0, &x, &y).0;
        let mut fd = Vec::with_capacity(d + 1);
        for j in 0..d {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += FD_STEP;
            down[j] -= FD_STEP;
            fd.push((f(&up, b) - f(&down, b)) / (2.0 * FD_STEP));
        }
        fd.push((f(&w, b + FD_STEP) - f(&w, b - FD_STEP)) / (2.0 * FD_STEP));
        // relative error in the max norm
        let scale = grad.iter().fold(1e-8f64, |a, g| a.max(g.abs()));
        let err = grad
            .iter()
            .zip(&fd)
            .fold(0.0f64, |a, (g, h)| a.max((g - h).abs()));
        worst = worst.max(err / scale);

        let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
        let (_, _, trace) = solve(&x, &y, lambda, vec![0.0; d], 0.0, &SolverOptions::default());
        monotone &= trace.objectives.windows(2).all(|p| p[1] <= p[0]);
    }
    let pass = worst <= GRADIENT_REL_TOL && monotone;
    report(
        4,
        "logistic regression gradient",
        pass,
        &format!("{GRADIENT_PROBLEMS} problems, max relative error {worst:.2e}, objective monotone {monotone}"),
    );
    assert!(pass);
}

fn leakage_pool() -> Vec<(String, Dataset)> {
    let cfg = GaussianPoolConfig {
        size_range: [200, 400],
        d_range: [6, 12],
        ..GaussianPoolConfig::paper_defaults(LEAKAGE_DATASETS, 55)
    };
    generate_gaussian_pool(&cfg)
        .unwrap()
        .into_iter()
        .map(|g| (g.name, g.dataset))
        .collect()
}

#[test]
fn criterion_5_leakage_guard() {
    let pool = leakage_pool();
    let cfg = MatrixConfig::new(
        vec![
            ModelFamily::DecisionTree,
            ModelFamily::Knn,
            ModelFamily::LogRegL1,
        ],
        default_cells(),
        10,
        5,
    );
    let run = benchmark::run_matrix(&pool, &cfg, None, false).unwrap();
    let mut audited_folds = 0;
    let mut dirty_folds = 0;
    for outcome in &run.outcomes {
        let eval = outcome.evaluation.as_ref().expect("evaluated cell");
        for fold in &eval.report.folds {
            audited_folds += 1;
            dirty_folds += usize::from(!fold.audit.is_clean());
        }
    }

    // independent replay: resample each training fold and inspect test ids
    let mut replay_violations = 0;
    for (t, (_, ds)) in pool.iter().enumerate() {
        for fold in stratified_kfold(ds, 10, t as u64).unwrap() {
            let train = ds.subset(&fold.train);
            let test_ids: HashSet<ElementId> = fold.test.iter().map(|&i| ds.ids()[i]).collect();
            replay_violations += test_ids.iter().filter(|id| id.is_synthetic()).count();
            let m = select_multiplier_eqs(&train).unwrap();
            for method in [Method::Ros, Method::Smote] {
                let out = resample(&train, &ResamplingSpec::new(method, m), t as u64).unwrap();
                replay_violations += out
                    .dataset
                    .ids()
                    .iter()
                    .filter(|id| test_ids.contains(id))
                    .count();
                for (_, parents) in out.provenance.parents() {
                    replay_violations += parents.iter().filter(|p| test_ids.contains(p)).count();
                }
            }
        }
    }
    let pass = dirty_folds == 0 && replay_violations == 0 && audited_folds > 0;
    report(
        5,
        "leakage guard",
        pass,
        &format!(
            "{LEAKAGE_DATASETS} datasets, {audited_folds} folds audited, {dirty_folds} dirty, {replay_violations} replay violations"
        ),
    );
    assert!(pass);
}

/// p_i(beta) straight from the definition: the share of tasks on which
/// method i is worse than the best by a factor of at most beta.
fn profile_oracle(q: &QualityMatrix, method: usize, beta: f64) -> f64 {
    let rows: Vec<Vec<f64>> = q
        .values
        .iter()
        .filter(|r| r.iter().all(Option::is_some))
        .map(|r| r.iter().map(|v| v.unwrap().max(1e-9)).collect())
        .collect();
    let hits = rows
        .iter()
        .filter(|r| {
            let best = r.iter().copied().fold(f64::MIN, f64::max);
            best / r[method] <= beta
        })
        .count();
    hits as f64 / rows.len() as f64
}

#[test]
fn criterion_6_dolan_more_oracle() {
    let mut rng = common::rng(606);
    let mut worst = 0.0f64;
    let mut shape_ok = true;
    for case in 0..PROFILE_MATRICES {
        let tasks = rng.random_range(1..40);
        let methods = rng.random_range(1..8);
        let names = (0..methods).map(|i| format!("m{i}")).collect();
        let mut q = QualityMatrix::new((0..tasks).map(|t| format!("t{t}")).collect(), names);
        for t in 0..tasks {
            for i in 0..methods {
                let v = match rng.random_range(0..20) {
                    0 if t > 0 => None,
                    1 => Some(0.0),
                    _ => Some(rng.random_range(0.0..=1.0)),
                };
                q.set(t, i, v);
            }
        }
        let betas = match benchmark::default_beta_grid(&q, 50) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let profile = benchmark::dolan_more(&q, &betas).unwrap();
        for (i, curve) in profile.curves.iter().enumerate() {
            for (b, p) in curve.betas.iter().zip(&curve.p) {
                worst = worst.max((p - profile_oracle(&q, i, *b)).abs());
            }
            shape_ok &= curve.p.windows(2).all(|w| w[0] <= w[1]);
            shape_ok &= *curve.p.last().unwrap() == 1.0;
        }
        if case == 0 {
            assert!(!profile.curves.is_empty());
        }
    }
    let pass = worst <= PROFILE_TOL && shape_ok;
    report(
        6,
        "Dolan-More oracle equivalence",
        pass,
        &format!("{PROFILE_MATRICES} matrices, max |diff| {worst:.2e}, monotone and ending at 1: {shape_ok}"),
    );
    assert!(pass);
}

struct DirectionalRun {
    csv: Vec<u8>,
    run: MatrixRun,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn directional_pool() -> Vec<(String, Dataset)> {
    let cfg = GaussianPoolConfig::paper_defaults(DIRECTIONAL_POOL, 2024);
    generate_gaussian_pool(&cfg)
        .unwrap()
        .into_iter()
        .map(|g| (g.name, g.dataset))
        .collect()
}

fn directional_benchmark(pool: &[(String, Dataset)]) -> DirectionalRun {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("results.csv");
    let cfg = MatrixConfig::new(vec![ModelFamily::DecisionTree], default_cells(), 10, 7);
    let start = Instant::now();
    let run = benchmark::run_matrix(pool, &cfg, Some(&path), false).unwrap();
    let elapsed = start.elapsed();
    DirectionalRun {
        csv: std::fs::read(&path).unwrap(),
        run,
        elapsed,
        _dir: dir,
    }
}

fn directional() -> &'static (Vec<(String, Dataset)>, DirectionalRun) {
    static RUN: OnceLock<(Vec<(String, Dataset)>, DirectionalRun)> = OnceLock::new();
    RUN.get_or_init(|| {
        let pool = directional_pool();
        let run = directional_benchmark(&pool);
        (pool, run)
    })
}

fn p_at(profile: &benchmark::Profile, method: &str, beta: f64) -> f64 {
    let curve = profile.curve(method).unwrap();
    // largest grid point not above beta
    let k = curve.betas.iter().rposition(|&b| b <= beta).unwrap();
    curve.p[k]
}

fn directional_profile() -> benchmark::Profile {
    let (_, run) = directional();
    let q = run.run.quality_matrix(ModelFamily::DecisionTree);
    let mut betas = benchmark::default_beta_grid(&q, 200).unwrap();
    betas.push(DIRECTIONAL_BETA);
    betas.sort_by(f64::total_cmp);
    benchmark::dolan_more(&q, &betas).unwrap()
}

#[test]
fn criterion_7_cvs_beats_eqs() {
    let (_, run) = directional();
    let profile = directional_profile();
    let sum = |cells: [&str; 3]| cells.iter().map(|c| p_at(&profile, c, 1.0)).sum::<f64>();
    let cvs = sum(["ros+cvs", "rus+cvs", "smote+cvs"]);
    let eqs = sum(["ros+eqs", "rus+eqs", "smote+eqs"]);
    let mut dominates = true;
    let mut detail = String::new();
    for method in ["ros", "rus", "smote"] {
        let c = p_at(&profile, &format!("{method}+cvs"), DIRECTIONAL_BETA);
        let e = p_at(&profile, &format!("{method}+eqs"), DIRECTIONAL_BETA);
        dominates &= c >= e;
        detail.push_str(&format!(
            ", {method} p({DIRECTIONAL_BETA}) cvs {c:.3} eqs {e:.3}"
        ));
    }
    let pass =
        cvs >= eqs && dominates && run.run.error_cells() == 0 && run.elapsed < BENCHMARK_LIMIT;
    report(
        7,
        "CV-search beats equalizing",
        pass,
        &format!(
            "{DIRECTIONAL_POOL} datasets, sum p(1) cvs {cvs:.3} eqs {eqs:.3}{detail}, {:.1?}",
            run.elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_no_resampling_sometimes_best() {
    let profile = directional_profile();
    let p1 = p_at(&profile, "none", 1.0);
    let wins = (p1 * profile.retained_rows as f64).round();
    let pass = p1 > 0.0;
    report(
        8,
        "no resampling wins somewhere",
        pass,
        &format!(
            "none p(1) = {p1:.3} ({wins} of {} datasets)",
            profile.retained_rows
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_end_to_end_determinism() {
    let (pool, first) = directional();
    let second = directional_benchmark(pool);
    let pass = first.csv == second.csv && !first.csv.is_empty();
    report(
        9,
        "end-to-end determinism",
        pass,
        &format!(
            "{} result bytes, identical {}",
            first.csv.len(),
            first.csv == second.csv
        ),
    );
    assert!(pass);
}
