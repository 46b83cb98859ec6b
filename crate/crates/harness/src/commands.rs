//! The seven operations behind the CLI subcommands.
//!
//! Each takes a validated config and an output directory and is safe to
//! rerun: datasets are reused when present, and everything written under
//! the versioned formats is a pure function of config and seed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gsml_core::error::{Error, Result};
use gsml_core::RegressionModel64;

use crate::config::{ExperimentConfig, LabelMode};
use crate::csvio::{self, fmt_f64};
use crate::dataset::{self, LoadedDataset};
use crate::importance::per_param_importance;
use crate::normcheck::run_norm_probe;
use crate::pipeline::{
    cross_validate, evaluate, split_ids, train_observable, FeatureCache, FeatureEngine, HyperPoint,
};
use crate::probe::{lattice_diameter, locality_curve};
use crate::seeding::{derived_seed, Purpose};
use crate::sweep::{self, METRICS_HEADER};

const CV_HEADER: &str = "site_i,site_j,r,gamma,alpha,radius,fold,rmse";
const IMPORTANCE_HEADER: &str = "site_i,site_j,edge_a,edge_b,importance";
const PROBE_HEADER: &str = "instance_id,site_i,site_j,delta1,kept_params,err";

/// One trained model in `selected.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedModel {
    pub site_i: usize,
    pub site_j: usize,
    pub r: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub radius: Option<f64>,
    pub cv_rmse: f64,
    pub model_file: String,
}

impl SelectedModel {
    fn point(&self) -> HyperPoint {
        HyperPoint { r: self.r, gamma: self.gamma, alpha: self.alpha, radius: self.radius }
    }
}

/// Index of a training run's models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub format: String,
    pub seed: u64,
    pub models: Vec<SelectedModel>,
}

const TRAIN_FORMAT: &str = "gsml.selected.v1";

fn dataset_dir(out: &Path) -> PathBuf {
    out.join("data")
}

fn stored_shadow_size(cfg: &ExperimentConfig) -> Option<usize> {
    match cfg.label_mode {
        LabelMode::Shadow => Some(cfg.shadow_size),
        LabelMode::Exact => None,
    }
}

/// `gen-data`: write the dataset, unconditionally regenerating it.
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lattice = cfg.lattice()?;
    let ham = cfg.hamiltonian_on(&lattice)?;
    let pairs = cfg.observables_on(&ham);
    let dir = dataset_dir(out);
    let manifest = dataset::generate(
        &ham,
        &pairs,
        cfg.num_instances,
        cfg.seed,
        stored_shadow_size(cfg),
        &dir,
    )?;
    println!(
        "wrote {} instances x {} observables to {}",
        manifest.num_instances,
        manifest.observables.len(),
        dir.display()
    );
    Ok(())
}

/// Load labels for training: exact, or snapshot estimates at the config's
/// budget.
fn training_labels(cfg: &ExperimentConfig, data: &LoadedDataset) -> Result<Vec<Vec<f64>>> {
    match cfg.label_mode {
        LabelMode::Exact => Ok((0..data.num_instances())
            .map(|id| (0..data.pairs().len()).map(|p| data.exact_label(id, p)).collect())
            .collect()),
        LabelMode::Shadow => data.shadow_labels(cfg.shadow_size, data.pairs()),
    }
}

/// `train`: cross-validate and fit one model per observable.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lattice = cfg.lattice()?;
    let ham = cfg.hamiltonian_on(&lattice)?;
    let pairs = cfg.observables_on(&ham);
    let data = dataset::ensure(
        &ham,
        &pairs,
        cfg.num_instances,
        cfg.seed,
        stored_shadow_size(cfg),
        &dataset_dir(out),
    )?;
    let labels = training_labels(cfg, &data)?;
    let (train_ids, _) = split_ids(data.num_instances(), cfg.num_train(), cfg.seed)?;
    let train_couplings: Vec<Vec<f64>> =
        train_ids.iter().map(|&id| data.couplings()[id].clone()).collect();
    let engine = FeatureEngine::build(cfg, &ham, cfg.seed)?;
    let cache = FeatureCache::new(&engine, &train_couplings)?;

    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir)?;

    let fitted: Result<Vec<_>> = pairs
        .par_iter()
        .enumerate()
        .map(|(p_idx, &(i, j))| {
            let train_labels: Vec<f64> = train_ids.iter().map(|&id| labels[id][p_idx]).collect();
            let outcome = cross_validate(&engine, cfg, &cache, &train_labels, cfg.seed)?;
            let model = train_observable(&engine, cfg, &cache, &train_labels, &outcome.best)?;
            Ok((i, j, outcome, model))
        })
        .collect();
    let fitted = fitted?;

    let mut cv_rows = Vec::new();
    let mut selected = Vec::with_capacity(fitted.len());
    for (i, j, outcome, model) in fitted {
        for row in &outcome.table {
            let h = row.point.csv_fields();
            cv_rows.push(vec![
                i.to_string(),
                j.to_string(),
                h[0].clone(),
                h[1].clone(),
                h[2].clone(),
                h[3].clone(),
                row.fold.to_string(),
                fmt_f64(row.rmse),
            ]);
        }
        let file = format!("models/model_{i}_{j}.json");
        model.save_json(&out.join(&file))?;
        selected.push(SelectedModel {
            site_i: i,
            site_j: j,
            r: outcome.best.r,
            gamma: outcome.best.gamma,
            alpha: outcome.best.alpha,
            radius: outcome.best.radius,
            cv_rmse: outcome.best_rmse,
            model_file: file,
        });
    }
    csvio::write_csv(out.join("cv_table.csv"), "cv", CV_HEADER, &cv_rows)?;
    let report = TrainReport { format: TRAIN_FORMAT.into(), seed: cfg.seed, models: selected };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::format(format!("train report serialization failed: {e}")))?;
    fs::write(out.join("selected.json"), text + "\n")?;
    println!("trained {} models into {}", report.models.len(), out.display());
    Ok(())
}

fn load_train_report(out: &Path) -> Result<TrainReport> {
    let path = out.join("selected.json");
    let text = fs::read_to_string(&path).map_err(|_| {
        Error::arg(format!("no training output at {}; run `train` first", path.display()))
    })?;
    let report: TrainReport = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("selected.json: {e}")))?;
    if report.format != TRAIN_FORMAT {
        return Err(Error::format(format!(
            "selected.json has format {:?}, expected {TRAIN_FORMAT:?}",
            report.format
        )));
    }
    Ok(report)
}

/// `eval`: score the trained models on the held-out split.
pub fn eval(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let report = load_train_report(out)?;
    let lattice = cfg.lattice()?;
    let ham = cfg.hamiltonian_on(&lattice)?;
    let pairs = cfg.observables_on(&ham);
    let data = dataset::ensure(
        &ham,
        &pairs,
        cfg.num_instances,
        cfg.seed,
        stored_shadow_size(cfg),
        &dataset_dir(out),
    )?;
    let labels = training_labels(cfg, &data)?;
    let (train_ids, test_ids) = split_ids(data.num_instances(), cfg.num_train(), cfg.seed)?;
    if test_ids.is_empty() {
        return Err(Error::arg("no test instances: lower num_train or train_fraction"));
    }
    let engine = FeatureEngine::build(cfg, &ham, cfg.seed)?;
    let train_couplings: Vec<Vec<f64>> =
        train_ids.iter().map(|&id| data.couplings()[id].clone()).collect();
    let test_couplings: Vec<Vec<f64>> =
        test_ids.iter().map(|&id| data.couplings()[id].clone()).collect();
    let train_cache = FeatureCache::new(&engine, &train_couplings)?;
    let test_cache = FeatureCache::new(&engine, &test_couplings)?;

    let mut rows = Vec::new();
    let mut train_sse = 0.0;
    let mut test_sse = 0.0;
    let mut train_count = 0;
    let mut test_count = 0;
    for sel in &report.models {
        let p_idx = pairs
            .iter()
            .position(|&(i, j)| (i, j) == (sel.site_i, sel.site_j))
            .ok_or_else(|| {
                Error::arg(format!(
                    "model for pair ({}, {}) has no matching observable in this config",
                    sel.site_i, sel.site_j
                ))
            })?;
        let model = RegressionModel64::load_json(&out.join(&sel.model_file))?;
        let point = sel.point();
        let train_labels: Vec<f64> = train_ids.iter().map(|&id| labels[id][p_idx]).collect();
        let train_stats = evaluate(&engine, &model, &point, &train_cache, &train_labels)?;
        let exact_test: Vec<f64> =
            test_ids.iter().map(|&id| data.exact_label(id, p_idx)).collect();
        let test_stats = evaluate(&engine, &model, &point, &test_cache, &exact_test)?;
        let h = point.csv_fields();
        rows.push(vec![
            "none".into(),
            String::new(),
            sel.site_i.to_string(),
            sel.site_j.to_string(),
            h[0].clone(),
            h[1].clone(),
            h[2].clone(),
            h[3].clone(),
            mode_name(cfg),
            shadow_field(cfg),
            train_stats.count.to_string(),
            test_stats.count.to_string(),
            fmt_f64(train_stats.rmse),
            fmt_f64(test_stats.rmse),
        ]);
        train_sse += train_stats.sse;
        test_sse += test_stats.sse;
        train_count += train_stats.count;
        test_count += test_stats.count;
    }
    rows.push(vec![
        "none".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        mode_name(cfg),
        shadow_field(cfg),
        (train_count / report.models.len().max(1)).to_string(),
        (test_count / report.models.len().max(1)).to_string(),
        fmt_f64((train_sse / train_count.max(1) as f64).sqrt()),
        fmt_f64((test_sse / test_count.max(1) as f64).sqrt()),
    ]);
    csvio::write_csv(out.join("metrics.csv"), "metrics", METRICS_HEADER, &rows)?;
    println!("evaluated {} models into {}", report.models.len(), out.display());
    Ok(())
}

fn mode_name(cfg: &ExperimentConfig) -> String {
    match cfg.label_mode {
        LabelMode::Exact => "exact".into(),
        LabelMode::Shadow => "shadow".into(),
    }
}

fn shadow_field(cfg: &ExperimentConfig) -> String {
    match cfg.label_mode {
        LabelMode::Exact => String::new(),
        LabelMode::Shadow => cfg.shadow_size.to_string(),
    }
}

/// `sweep`: the full experiment driver.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let manifest = sweep::run_experiment(cfg, out)?;
    for p in &manifest.points {
        println!(
            "{}: test rmse {:.4} over {} test instances",
            p.point.label, p.pooled_test_rmse, p.num_test
        );
    }
    println!("wrote metrics to {}", out.join("metrics.csv").display());
    Ok(())
}

/// `verify-norm`: certify random observables and persist the evidence.
pub fn verify_norm(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lattice = cfg.lattice()?;
    let spec = cfg.norm_probe.clone().unwrap_or_default();
    let report = run_norm_probe(&lattice, &spec, cfg.seed)?;
    fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::format(format!("report serialization failed: {e}")))?;
    fs::write(out.join("certificates.json"), text + "\n")?;
    println!("certified {}/{} observables", report.passed, report.trials);
    report.require_all_passed()
}

/// `importance`: per-edge weight mass of every trained model.
pub fn importance(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let report = load_train_report(out)?;
    let lattice = cfg.lattice()?;
    let ham = cfg.hamiltonian_on(&lattice)?;
    let engine = FeatureEngine::build(cfg, &ham, cfg.seed)?;
    let edges = ham.lattice().edges();
    let mut rows = Vec::new();
    for sel in &report.models {
        let model = RegressionModel64::load_json(&out.join(&sel.model_file))?;
        let imp = per_param_importance(&engine, &ham, &model, &sel.point())?;
        for (e, &(a, b)) in edges.iter().enumerate() {
            rows.push(vec![
                sel.site_i.to_string(),
                sel.site_j.to_string(),
                a.to_string(),
                b.to_string(),
                fmt_f64(imp[e]),
            ]);
        }
    }
    csvio::write_csv(out.join("importance.csv"), "importance", IMPORTANCE_HEADER, &rows)?;
    println!(
        "wrote importance of {} edges x {} models to {}",
        edges.len(),
        report.models.len(),
        out.display()
    );
    Ok(())
}

/// `probe-locality`: decay of correlations under coupling windows.
pub fn probe_locality(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let lattice = cfg.lattice()?;
    let ham = cfg.hamiltonian_on(&lattice)?;
    let pairs = cfg.observables_on(&ham);
    let spec = cfg.locality.clone().unwrap_or_default();
    let grid: Vec<usize> = match &spec.delta1_grid {
        Some(g) => g.clone(),
        None => (0..=lattice_diameter(&ham)).collect(),
    };

    let mut rows = Vec::new();
    let mut attempt: u64 = 0;
    for slot in 0..spec.instances {
        // draw until the spectral gap clears the configured floor
        let x = loop {
            let x = ham.sample_instance(derived_seed(cfg.seed, Purpose::LocalityProbe, attempt));
            attempt += 1;
            if spec.min_gap <= 0.0 {
                break x;
            }
            let gs = ham.ground_state(&x)?;
            if gs.gap() >= spec.min_gap {
                break x;
            }
            if attempt > (spec.instances as u64 + 1) * 100 {
                return Err(Error::numeric(format!(
                    "could not find {} instances with gap >= {} in {attempt} draws",
                    spec.instances, spec.min_gap
                )));
            }
        };
        for &(i, j) in &pairs {
            let curve = locality_curve(&ham, (i, j), &x, &grid)?;
            for row in curve {
                rows.push(vec![
                    slot.to_string(),
                    i.to_string(),
                    j.to_string(),
                    row.delta1.to_string(),
                    row.kept.to_string(),
                    fmt_f64(row.err),
                ]);
            }
        }
    }
    fs::create_dir_all(out)?;
    csvio::write_csv(out.join("probe.csv"), "probe", PROBE_HEADER, &rows)?;
    println!(
        "probed {} instances x {} pairs x {} window sizes into {}",
        spec.instances,
        pairs.len(),
        grid.len(),
        out.display()
    );
    Ok(())
}
