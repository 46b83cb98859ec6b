//! The experiment driver: train/evaluate across a sweep axis and persist
//! metrics incrementally.
//!
//! A sweep varies one knob — snapshot budget, training fraction, or the
//! lattice itself — while everything else (seeds included) stays fixed, so
//! consecutive points are paired comparisons. Snapshot budgets share one
//! measurement record per instance and read prefixes of it; training
//! fractions grow the training set along one fixed shuffle.
//!
//! Results land in `metrics.csv` (flushed after every sweep point, so an
//! interrupted run keeps its finished points), hyperparameter searches in
//! `cv_table.csv`, and a closing `manifest.json` ties the run together.
//! Wall-clock timings go to `timings.txt`, which is deliberately outside
//! the versioned, byte-reproducible output set.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use gsml_core::error::{Error, Result};
use gsml_core::ParamHamiltonian64;

use crate::config::{ExperimentConfig, LabelMode, SweepSpec};
use crate::csvio::{fmt_f64, CsvWriter};
use crate::dataset::{self, LoadedDataset};
use crate::pipeline::{
    cross_validate, evaluate, split_ids, train_observable, FeatureCache, FeatureEngine,
};

/// Header of `metrics.csv`. The same schema serves sweeps and single-point
/// evaluations (`sweep_kind` = `none`); the trailing pooled row of each
/// sweep point leaves the per-observable columns empty.
pub const METRICS_HEADER: &str = "sweep_kind,sweep_value,site_i,site_j,r,gamma,alpha,radius,\
                                  label_mode,shadow_size,num_train,num_test,train_rmse,test_rmse";

/// Header of the sweep's hyperparameter search table.
pub const CV_SWEEP_HEADER: &str = "sweep_kind,sweep_value,site_i,site_j,r,gamma,alpha,radius,fold,rmse";

/// One resolved sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    /// Human-readable label (also the dataset directory suffix if the
    /// lattice varies).
    pub label: String,
    pub sweep_kind: String,
    pub sweep_value: String,
    pub lattice: Vec<usize>,
    pub num_train: usize,
    /// Snapshots per instance read for training labels (`None` = exact).
    pub shadow_budget: Option<usize>,
}

/// Everything measured at one sweep point for one observable.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub site_i: usize,
    pub site_j: usize,
    pub point: crate::pipeline::HyperPoint,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub train_sse: f64,
    pub test_sse: f64,
    pub train_count: usize,
    pub test_count: usize,
}

/// Closing summary of one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub num_test: usize,
    pub pooled_train_rmse: f64,
    pub pooled_test_rmse: f64,
    /// Standard deviation of the exact test labels at this point.
    pub test_label_std: f64,
}

/// Manifest written at the end of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub format: String,
    pub config: ExperimentConfig,
    pub points: Vec<PointSummary>,
}

/// Resolve the configured sweep into concrete points.
///
/// Without a sweep section the run is a single point at the config's own
/// values, which is what `eval` uses.
pub fn resolve_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let base_label_budget = match cfg.label_mode {
        LabelMode::Exact => None,
        LabelMode::Shadow => Some(cfg.shadow_size),
    };
    match &cfg.sweep {
        None => vec![SweepPoint {
            label: "full".into(),
            sweep_kind: "none".into(),
            sweep_value: String::new(),
            lattice: cfg.lattice.clone(),
            num_train: cfg.num_train(),
            shadow_budget: base_label_budget,
        }],
        Some(SweepSpec::ShadowSizes { values }) => values
            .iter()
            .map(|&t| SweepPoint {
                label: format!("t{t}"),
                sweep_kind: "shadow_sizes".into(),
                sweep_value: t.to_string(),
                lattice: cfg.lattice.clone(),
                num_train: cfg.num_train(),
                shadow_budget: Some(t),
            })
            .collect(),
        Some(SweepSpec::TrainFractions { values }) => values
            .iter()
            .map(|&p| SweepPoint {
                label: format!("p{p}"),
                sweep_kind: "train_fractions".into(),
                sweep_value: fmt_f64(p),
                lattice: cfg.lattice.clone(),
                num_train: ((p * cfg.num_instances as f64).floor() as usize).max(1),
                shadow_budget: base_label_budget,
            })
            .collect(),
        Some(SweepSpec::LatticeSizes { values, .. }) => values
            .iter()
            .map(|sides| {
                let label = sides.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
                SweepPoint {
                    label: label.clone(),
                    sweep_kind: "lattice_sizes".into(),
                    sweep_value: label,
                    lattice: sides.clone(),
                    num_train: cfg.num_train(),
                    shadow_budget: base_label_budget,
                }
            })
            .collect(),
    }
}

/// Snapshots that must exist on disk per instance to serve every point.
fn stored_shadow_size(cfg: &ExperimentConfig, points: &[SweepPoint]) -> Option<usize> {
    points.iter().filter_map(|p| p.shadow_budget).max().or(match cfg.label_mode {
        LabelMode::Shadow => Some(cfg.shadow_size),
        LabelMode::Exact => None,
    })
}

/// Train labels for one point: exact, or estimated from snapshot prefixes.
fn training_labels(
    data: &LoadedDataset,
    point: &SweepPoint,
    pairs: &[(usize, usize)],
) -> Result<Vec<Vec<f64>>> {
    match point.shadow_budget {
        None => Ok((0..data.num_instances())
            .map(|id| (0..pairs.len()).map(|p| data.exact_label(id, p)).collect())
            .collect()),
        Some(t) => data.shadow_labels(t, pairs),
    }
}

/// Run one sweep point: cross-validate, refit, and score every observable.
///
/// Observables run as independent jobs on the ambient thread pool; results
/// are collected in observable order, so the output does not depend on
/// scheduling.
pub fn run_point(
    cfg: &ExperimentConfig,
    ham: &ParamHamiltonian64,
    engine: &FeatureEngine,
    data: &LoadedDataset,
    point: &SweepPoint,
) -> Result<(Vec<MetricsRecord>, Vec<crate::pipeline::CvRow>, Vec<(usize, usize)>)> {
    let pairs = cfg.observables_on(ham);
    let (train_ids, test_ids) = split_ids(data.num_instances(), point.num_train, cfg.seed)?;
    if test_ids.is_empty() {
        return Err(Error::arg(format!(
            "sweep point {} leaves no test instances",
            point.label
        )));
    }
    let labels = training_labels(data, point, &pairs)?;

    let train_couplings: Vec<Vec<f64>> =
        train_ids.iter().map(|&id| data.couplings()[id].clone()).collect();
    let test_couplings: Vec<Vec<f64>> =
        test_ids.iter().map(|&id| data.couplings()[id].clone()).collect();
    let train_cache = FeatureCache::new(engine, &train_couplings)?;
    let test_cache = FeatureCache::new(engine, &test_couplings)?;

    let per_pair: Result<Vec<(MetricsRecord, Vec<crate::pipeline::CvRow>)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(p_idx, &(i, j))| {
            let train_labels: Vec<f64> =
                train_ids.iter().map(|&id| labels[id][p_idx]).collect();
            let outcome = cross_validate(engine, cfg, &train_cache, &train_labels, cfg.seed)?;
            let model = train_observable(engine, cfg, &train_cache, &train_labels, &outcome.best)?;
            let train_stats = evaluate(engine, &model, &outcome.best, &train_cache, &train_labels)?;
            let exact_test: Vec<f64> =
                test_ids.iter().map(|&id| data.exact_label(id, p_idx)).collect();
            let test_stats = evaluate(engine, &model, &outcome.best, &test_cache, &exact_test)?;
            let cv_rows = outcome.table;
            Ok((
                MetricsRecord {
                    site_i: i,
                    site_j: j,
                    point: outcome.best,
                    train_rmse: train_stats.rmse,
                    test_rmse: test_stats.rmse,
                    train_sse: train_stats.sse,
                    test_sse: test_stats.sse,
                    train_count: train_stats.count,
                    test_count: test_stats.count,
                },
                cv_rows,
            ))
        })
        .collect();
    let per_pair = per_pair?;
    let records = per_pair.iter().map(|(r, _)| r.clone()).collect();
    let cv_rows = per_pair.into_iter().map(|(_, rows)| rows).collect::<Vec<_>>();
    // flatten with pair tags preserved by order
    let mut flat = Vec::new();
    let mut pair_tags = Vec::new();
    for (rows, &(i, j)) in cv_rows.into_iter().zip(&pairs) {
        for row in rows {
            flat.push(row);
            pair_tags.push((i, j));
        }
    }
    Ok((records, flat, pair_tags))
}

/// Exact test labels pooled over observables, for label-spread statistics.
fn pooled_test_labels(
    cfg: &ExperimentConfig,
    ham: &ParamHamiltonian64,
    data: &LoadedDataset,
    point: &SweepPoint,
) -> Result<Vec<f64>> {
    let pairs = cfg.observables_on(ham);
    let (_, test_ids) = split_ids(data.num_instances(), point.num_train, cfg.seed)?;
    let mut out = Vec::with_capacity(test_ids.len() * pairs.len());
    for &id in &test_ids {
        for p in 0..pairs.len() {
            out.push(data.exact_label(id, p));
        }
    }
    Ok(out)
}

fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

fn pooled_rmse(sse: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        (sse / count as f64).sqrt()
    }
}

/// Execute the configured sweep under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out)?;
    let points = resolve_points(cfg);
    let stored_t = stored_shadow_size(cfg, &points);

    let mut metrics = CsvWriter::create(out.join("metrics.csv"), "metrics", METRICS_HEADER)?;
    let mut cv_table = CsvWriter::create(out.join("cv_table.csv"), "cv_sweep", CV_SWEEP_HEADER)?;
    let mut timings = fs::File::create(out.join("timings.txt"))?;

    let mut summaries = Vec::with_capacity(points.len());
    for point in &points {
        let started = Instant::now();
        let lattice = gsml_core::geometry::Lattice::new(point.lattice.clone())?;
        let ham = cfg.hamiltonian_on(&lattice)?;
        let pairs = cfg.observables_on(&ham);
        let data_dir = dataset_dir(out, cfg, point);
        let data = dataset::ensure(
            &ham,
            &pairs,
            cfg.num_instances,
            cfg.seed,
            stored_t,
            &data_dir,
        )?;
        let engine = FeatureEngine::build(cfg, &ham, cfg.seed)?;

        let (records, cv_rows, cv_tags) = run_point(cfg, &ham, &engine, &data, point)?;
        for (row, &(i, j)) in cv_rows.iter().zip(&cv_tags) {
            let h = row.point.csv_fields();
            cv_table.write_row(&[
                point.sweep_kind.clone(),
                point.sweep_value.clone(),
                i.to_string(),
                j.to_string(),
                h[0].clone(),
                h[1].clone(),
                h[2].clone(),
                h[3].clone(),
                row.fold.to_string(),
                fmt_f64(row.rmse),
            ])?;
        }
        let mut train_sse = 0.0;
        let mut test_sse = 0.0;
        let mut train_count = 0;
        let mut test_count = 0;
        for rec in &records {
            let h = rec.point.csv_fields();
            metrics.write_row(&[
                point.sweep_kind.clone(),
                point.sweep_value.clone(),
                rec.site_i.to_string(),
                rec.site_j.to_string(),
                h[0].clone(),
                h[1].clone(),
                h[2].clone(),
                h[3].clone(),
                label_mode_name(point),
                point.shadow_budget.map_or(String::new(), |t| t.to_string()),
                rec.train_count.to_string(),
                rec.test_count.to_string(),
                fmt_f64(rec.train_rmse),
                fmt_f64(rec.test_rmse),
            ])?;
            train_sse += rec.train_sse;
            test_sse += rec.test_sse;
            train_count += rec.train_count;
            test_count += rec.test_count;
        }
        let pooled_train = pooled_rmse(train_sse, train_count);
        let pooled_test = pooled_rmse(test_sse, test_count);
        metrics.write_row(&[
            point.sweep_kind.clone(),
            point.sweep_value.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            label_mode_name(point),
            point.shadow_budget.map_or(String::new(), |t| t.to_string()),
            (train_count / records.len().max(1)).to_string(),
            (test_count / records.len().max(1)).to_string(),
            fmt_f64(pooled_train),
            fmt_f64(pooled_test),
        ])?;
        // partial results survive an interrupted sweep
        metrics.flush()?;
        cv_table.flush()?;

        let label_pool = pooled_test_labels(cfg, &ham, &data, point)?;
        summaries.push(PointSummary {
            point: point.clone(),
            num_test: data.num_instances() - point.num_train,
            pooled_train_rmse: pooled_train,
            pooled_test_rmse: pooled_test,
            test_label_std: std_dev(&label_pool),
        });
        writeln!(timings, "{},{:.0}ms", point.label, started.elapsed().as_millis())?;
    }

    if let Some(SweepSpec::LatticeSizes { normalize_std: true, .. }) = &cfg.sweep {
        write_rescaled_metrics(out, &summaries)?;
    }

    let manifest = RunManifest {
        format: "gsml.manifest.v1".into(),
        config: cfg.clone(),
        points: summaries,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(format!("manifest serialization failed: {e}")))?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

fn label_mode_name(point: &SweepPoint) -> String {
    match point.shadow_budget {
        None => "exact".into(),
        Some(_) => "shadow".into(),
    }
}

fn dataset_dir(out: &Path, cfg: &ExperimentConfig, point: &SweepPoint) -> PathBuf {
    if point.lattice == cfg.lattice {
        out.join("data")
    } else {
        out.join(format!("data_{}", point.label))
    }
}

/// `metrics_scaled.csv`: pooled errors divided by each point's test label
/// spread and multiplied by the sweep-average spread, making sizes with
/// different label variances comparable. Raw metrics stay untouched.
fn write_rescaled_metrics(out: &Path, summaries: &[PointSummary]) -> Result<()> {
    let stds: Vec<f64> = summaries.iter().map(|s| s.test_label_std).collect();
    let avg = stds.iter().sum::<f64>() / stds.len().max(1) as f64;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let scale = if s.test_label_std > 0.0 { avg / s.test_label_std } else { 1.0 };
            vec![
                s.point.sweep_kind.clone(),
                s.point.sweep_value.clone(),
                fmt_f64(s.test_label_std),
                fmt_f64(s.pooled_test_rmse),
                fmt_f64(s.pooled_test_rmse * scale),
            ]
        })
        .collect();
    crate::csvio::write_csv(
        out.join("metrics_scaled.csv"),
        "metrics_scaled",
        "sweep_kind,sweep_value,test_label_std,test_rmse,test_rmse_scaled",
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FeatureMapSpec, SolverSpec};
    use gsml_core::hamiltonian::TermNormalization;
    use tempfile::tempdir;

    fn tiny_config(sweep: Option<SweepSpec>) -> ExperimentConfig {
        ExperimentConfig {
            lattice: vec![3],
            family: "heisenberg".into(),
            normalization: TermNormalization::Raw,
            num_instances: 8,
            train_fraction: 0.5,
            num_train: None,
            shadow_size: 30,
            label_mode: LabelMode::Shadow,
            feature_map: FeatureMapSpec::Rff {
                delta1: 1,
                r_grid: vec![4],
                gamma_grid: vec![0.5],
                feature_seed: None,
            },
            solver: SolverSpec::Penalized { alpha_grid: vec![0.01] },
            folds: 2,
            seed: 19,
            output_dir: None,
            observables: None,
            sweep,
            norm_probe: None,
            locality: None,
        }
    }

    #[test]
    fn point_resolution_counts_and_budgets() {
        let cfg = tiny_config(Some(SweepSpec::ShadowSizes { values: vec![10, 30] }));
        let points = resolve_points(&cfg);
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].shadow_budget, Some(10));
        assert_eq!(stored_shadow_size(&cfg, &points), Some(30));

        let cfg = tiny_config(Some(SweepSpec::TrainFractions { values: vec![0.25, 0.75] }));
        let points = resolve_points(&cfg);
        assert_eq!(points[0].num_train, 2);
        assert_eq!(points[1].num_train, 6);

        let cfg = tiny_config(None);
        let points = resolve_points(&cfg);
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].sweep_kind, "none");
    }

    #[test]
    fn small_sweep_runs_end_to_end() {
        let cfg = tiny_config(Some(SweepSpec::ShadowSizes { values: vec![10, 30] }));
        let dir = tempdir().unwrap();
        let manifest = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.points.len(), 2);
        for s in &manifest.points {
            assert!(s.pooled_test_rmse >= 0.0);
            assert!(s.pooled_test_rmse.is_finite());
        }
        // metrics: per point, one row per edge (2 on a 3-chain) + pooled
        let rows = crate::csvio::read_csv(
            dir.path().join("metrics.csv"),
            "metrics",
            METRICS_HEADER,
        )
        .unwrap();
        assert_eq!(rows.len(), 2 * 3);
        // rerunning over the same directory reuses the dataset and agrees
        let again = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(
            serde_json::to_string(&again.points).unwrap(),
            serde_json::to_string(&manifest.points).unwrap()
        );
    }
}
