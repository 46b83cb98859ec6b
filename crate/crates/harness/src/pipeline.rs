//! Featurization, cross-validated training, and evaluation for one
//! experiment.
//!
//! The pieces compose in a fixed order: a [`FeatureEngine`] is built once
//! per config and lattice, a [`FeatureCache`] holds the per-instance work
//! that hyperparameters cannot change (centered coordinates, frequency
//! projections), and [`cross_validate`] / [`train_observable`] /
//! [`evaluate`] consume cache slices. Training labels may be exact or
//! snapshot-estimated; evaluation always scores against exact labels.

use serde::{Deserialize, Serialize};

use gsml_core::error::{Error, Result};
use gsml_core::features::{centered_coordinates, GridSpec};
use gsml_core::geometry::enumerate_geo_paulis;
use gsml_core::lasso::{
    fit_constrained, fit_penalized, fit_penalized_warm, ConstrainedOptions, PenalizedOptions,
};
use gsml_core::{Dataset64, IndicatorMap64, ParamHamiltonian64, RegressionModel64, RffMap64};

use crate::config::{ExperimentConfig, FeatureMapSpec, SolverSpec};
use crate::csvio::fmt_f64;
use crate::seeding::{derived_seed, shuffled_ids, Purpose};

/// Convergence tolerance for fits inside the cross-validation loop.
///
/// Looser than the final tolerance: fold scores only rank hyperparameters,
/// and the selected point is refit tightly afterwards.
const CV_TOL: f64 = 1e-6;

/// Convergence tolerance for the final per-observable fit.
const FINAL_TOL: f64 = 1e-8;

/// Relative agreement required between the two error accumulations.
const MSE_CROSS_CHECK_TOL: f64 = 1e-12;

/// One fully specified hyperparameter assignment; fields not applicable to
/// the configured map/solver stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    /// Frequencies per region (random Fourier map only).
    pub r: Option<usize>,
    /// Bandwidth (random Fourier map only).
    pub gamma: Option<f64>,
    /// Penalty weight (penalized solver only).
    pub alpha: Option<f64>,
    /// Ball radius (constrained solver only).
    pub radius: Option<f64>,
}

impl HyperPoint {
    /// CSV fields in `r,gamma,alpha,radius` order, empty when absent.
    pub fn csv_fields(&self) -> [String; 4] {
        [
            self.r.map_or(String::new(), |v| v.to_string()),
            self.gamma.map_or(String::new(), fmt_f64),
            self.alpha.map_or(String::new(), fmt_f64),
            self.radius.map_or(String::new(), fmt_f64),
        ]
    }
}

/// The configured feature map, built for one family.
pub enum FeatureEngine {
    Indicator(IndicatorMap64),
    Rff(RffMap64),
}

impl FeatureEngine {
    /// Build the map a config asks for. The random Fourier map draws its
    /// frequencies at the largest configured `r`, so every grid point reads
    /// a prefix of the same rows.
    pub fn build(
        cfg: &ExperimentConfig,
        ham: &ParamHamiltonian64,
        master_seed: u64,
    ) -> Result<FeatureEngine> {
        match &cfg.feature_map {
            FeatureMapSpec::Indicator { delta1, delta2_inv } => {
                let family = enumerate_geo_paulis(ham.lattice(), ham.range())?;
                let grid = GridSpec::new(*delta2_inv)?;
                let map = IndicatorMap64::build(ham, &family, *delta1, grid)?;
                Ok(FeatureEngine::Indicator(map))
            }
            FeatureMapSpec::Rff { delta1, r_grid, feature_seed, .. } => {
                let r_max = *r_grid.iter().max().expect("validated non-empty");
                let seed =
                    feature_seed.unwrap_or_else(|| derived_seed(master_seed, Purpose::FeatureMap, 0));
                let map = RffMap64::build(ham, *delta1, r_max, seed)?;
                Ok(FeatureEngine::Rff(map))
            }
        }
    }

    /// Grid of hyperparameter assignments in configuration order (the
    /// order ties are broken in).
    pub fn hyper_grid(&self, cfg: &ExperimentConfig) -> Vec<HyperPoint> {
        let (alphas, radius): (Vec<Option<f64>>, Option<f64>) = match &cfg.solver {
            SolverSpec::Penalized { alpha_grid } => {
                (alpha_grid.iter().map(|&a| Some(a)).collect(), None)
            }
            SolverSpec::Constrained { radius, .. } => (vec![None], Some(*radius)),
        };
        match &cfg.feature_map {
            FeatureMapSpec::Indicator { .. } => alphas
                .iter()
                .map(|&alpha| HyperPoint { r: None, gamma: None, alpha, radius })
                .collect(),
            FeatureMapSpec::Rff { r_grid, gamma_grid, .. } => {
                let mut grid = Vec::with_capacity(r_grid.len() * gamma_grid.len() * alphas.len());
                for &r in r_grid {
                    for &gamma in gamma_grid {
                        for &alpha in &alphas {
                            grid.push(HyperPoint {
                                r: Some(r),
                                gamma: Some(gamma),
                                alpha,
                                radius,
                            });
                        }
                    }
                }
                grid
            }
        }
    }

    /// Virtual feature-space size at one grid point.
    pub fn num_features(&self, point: &HyperPoint) -> Result<u64> {
        match self {
            FeatureEngine::Indicator(map) => Ok(map.num_features()),
            FeatureEngine::Rff(map) => {
                let r = point.r.ok_or_else(|| Error::arg("grid point lacks r"))?;
                Ok(map.num_features(r)? as u64)
            }
        }
    }

    /// Fingerprint of the rows one grid point produces. For the random
    /// Fourier map this covers `(r, gamma)` because feature indices at
    /// different `r` address different columns.
    pub fn point_fingerprint(&self, point: &HyperPoint) -> String {
        match self {
            FeatureEngine::Indicator(map) => map.fingerprint(),
            FeatureEngine::Rff(map) => format!(
                "{}:r={}:gamma={}",
                map.fingerprint(),
                point.r.unwrap_or(0),
                point.gamma.map_or(String::new(), fmt_f64),
            ),
        }
    }
}

/// Feature rows for a set of instances at one grid point.
pub enum FeatureRows {
    Sparse(Vec<Vec<(u64, f64)>>),
    Dense(Vec<Vec<f64>>),
}

impl FeatureRows {
    pub fn len(&self) -> usize {
        match self {
            FeatureRows::Sparse(rows) => rows.len(),
            FeatureRows::Dense(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Assemble the rows at `subset` (instance indices into this cache)
    /// into a regression dataset.
    pub fn dataset(
        &self,
        subset: &[usize],
        labels: Vec<f64>,
        num_features: u64,
        fingerprint: &str,
    ) -> Result<Dataset64> {
        match self {
            FeatureRows::Sparse(rows) => {
                let picked: Vec<Vec<(u64, f64)>> =
                    subset.iter().map(|&i| rows[i].clone()).collect();
                Dataset64::from_sparse_rows(&picked, labels, num_features, fingerprint)
            }
            FeatureRows::Dense(rows) => {
                let picked: Vec<Vec<f64>> = subset.iter().map(|&i| rows[i].clone()).collect();
                Dataset64::from_dense_rows(&picked, labels, fingerprint)
            }
        }
    }

    /// Model prediction for one cached instance.
    pub fn predict(&self, model: &RegressionModel64, idx: usize) -> Result<f64> {
        match self {
            FeatureRows::Sparse(rows) => Ok(model.predict_sparse(&rows[idx])),
            FeatureRows::Dense(rows) => model.predict_dense(&rows[idx]),
        }
    }
}

/// Hyperparameter-independent featurization work for a fixed instance set.
pub struct FeatureCache<'a> {
    engine: &'a FeatureEngine,
    /// Centered coordinates per instance.
    zs: Vec<Vec<f64>>,
    /// Frequency projections per instance (random Fourier map only).
    projections: Vec<Vec<Vec<f64>>>,
}

impl<'a> FeatureCache<'a> {
    /// Center the couplings and, for the random Fourier map, project them
    /// onto every frequency row once.
    pub fn new(engine: &'a FeatureEngine, couplings: &[Vec<f64>]) -> Result<FeatureCache<'a>> {
        let zs: Vec<Vec<f64>> = couplings.iter().map(|x| centered_coordinates(x)).collect();
        let projections = match engine {
            FeatureEngine::Indicator(_) => Vec::new(),
            FeatureEngine::Rff(map) => {
                zs.iter().map(|z| map.projections(z)).collect::<Result<Vec<_>>>()?
            }
        };
        Ok(FeatureCache { engine, zs, projections })
    }

    pub fn len(&self) -> usize {
        self.zs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zs.is_empty()
    }

    /// Feature rows for every cached instance at one grid point.
    pub fn rows_for(&self, point: &HyperPoint) -> Result<FeatureRows> {
        match self.engine {
            FeatureEngine::Indicator(map) => {
                let rows: Result<Vec<Vec<(u64, f64)>>> =
                    self.zs.iter().map(|z| map.features(z)).collect();
                Ok(FeatureRows::Sparse(rows?))
            }
            FeatureEngine::Rff(map) => {
                let r = point.r.ok_or_else(|| Error::arg("grid point lacks r"))?;
                let gamma = point.gamma.ok_or_else(|| Error::arg("grid point lacks gamma"))?;
                let rows: Result<Vec<Vec<f64>>> = self
                    .projections
                    .iter()
                    .map(|proj| map.features_from_projections(proj, r, gamma))
                    .collect();
                Ok(FeatureRows::Dense(rows?))
            }
        }
    }
}

/// Fit one model on an assembled dataset at one grid point.
pub fn fit_at(
    data: &Dataset64,
    solver: &SolverSpec,
    point: &HyperPoint,
    tol: f64,
    warm: Option<&[(u64, f64)]>,
) -> Result<RegressionModel64> {
    match solver {
        SolverSpec::Penalized { .. } => {
            let alpha = point.alpha.ok_or_else(|| Error::arg("grid point lacks alpha"))?;
            let mut options = PenalizedOptions::new(alpha);
            options.tol = tol;
            match warm {
                Some(start) => fit_penalized_warm(data, &options, start),
                None => fit_penalized(data, &options),
            }
        }
        SolverSpec::Constrained { gap_tol, .. } => {
            let radius = point.radius.ok_or_else(|| Error::arg("grid point lacks radius"))?;
            let options = ConstrainedOptions::new(radius, *gap_tol);
            fit_constrained(data, &options)
        }
    }
}

/// The seeded train/test partition of `0..m`: first `n_train` of one
/// shuffle against the rest.
///
/// Nested property: a larger `n_train` under the same seed extends the
/// training set without reshuffling, so training-size sweeps grow the data
/// rather than redraw it.
pub fn split_ids(m: usize, n_train: usize, master_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train > m {
        return Err(Error::arg(format!("cannot train on {n_train} of {m} instances")));
    }
    let shuffle = shuffled_ids(m, master_seed, Purpose::Split);
    let train: Vec<usize> = shuffle[..n_train].to_vec();
    let test: Vec<usize> = shuffle[n_train..].to_vec();
    for id in &train {
        if test.contains(id) {
            return Err(Error::numeric("train/test overlap: shuffle is broken"));
        }
    }
    Ok((train, test))
}

/// Contiguous fold blocks of a seeded shuffle of `0..n`.
pub fn fold_blocks(n: usize, folds: usize, master_seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::arg("need at least two folds"));
    }
    if n < folds {
        return Err(Error::arg(format!("cannot cut {n} training instances into {folds} folds")));
    }
    let shuffle = shuffled_ids(n, master_seed, Purpose::CvShuffle);
    let mut blocks = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        if lo == hi {
            return Err(Error::arg("degenerate (empty) cross-validation fold"));
        }
        blocks.push(shuffle[lo..hi].to_vec());
    }
    Ok(blocks)
}

/// One cross-validation table row.
#[derive(Debug, Clone, Serialize)]
pub struct CvRow {
    pub point: HyperPoint,
    pub fold: usize,
    pub rmse: f64,
}

/// Grid-search outcome for one observable.
#[derive(Debug, Clone, Serialize)]
pub struct CvOutcome {
    /// Argmin of pooled held-out error; ties go to the earlier grid point.
    pub best: HyperPoint,
    /// Pooled held-out error at `best`.
    pub best_rmse: f64,
    pub table: Vec<CvRow>,
}

/// Grid-search with pooled k-fold error.
///
/// `cache` and `labels` cover the training instances only. For the
/// penalized solver the penalty axis is solved warm from large to small
/// within each `(map point, fold)`.
pub fn cross_validate(
    engine: &FeatureEngine,
    cfg: &ExperimentConfig,
    cache: &FeatureCache,
    labels: &[f64],
    master_seed: u64,
) -> Result<CvOutcome> {
    let n = cache.len();
    if labels.len() != n {
        return Err(Error::arg(format!("{n} cached instances against {} labels", labels.len())));
    }
    let blocks = fold_blocks(n, cfg.folds, master_seed)?;
    let grid = engine.hyper_grid(cfg);

    // group consecutive grid points sharing a map point (same r, gamma):
    // those share rows and warm-start along their penalty axis
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for idx in 1..=grid.len() {
        let boundary = idx == grid.len()
            || grid[idx].r != grid[start].r
            || grid[idx].gamma != grid[start].gamma;
        if boundary {
            groups.push((start, idx));
            start = idx;
        }
    }

    let mut sse = vec![0.0f64; grid.len()];
    let mut table_cells = vec![vec![0.0f64; blocks.len()]; grid.len()];
    for &(lo, hi) in &groups {
        let rows = cache.rows_for(&grid[lo])?;
        let num_features = engine.num_features(&grid[lo])?;
        let fingerprint = engine.point_fingerprint(&grid[lo]);
        for (f, held) in blocks.iter().enumerate() {
            let train: Vec<usize> = blocks
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, b)| b.iter().copied())
                .collect();
            let train_labels: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
            let data = rows.dataset(&train, train_labels, num_features, &fingerprint)?;

            // penalty axis from strongest to weakest, warm-started
            let mut order: Vec<usize> = (lo..hi).collect();
            order.sort_by(|&a, &b| {
                let wa = grid[a].alpha.unwrap_or(0.0);
                let wb = grid[b].alpha.unwrap_or(0.0);
                wb.partial_cmp(&wa).expect("finite penalties")
            });
            let mut warm: Option<RegressionModel64> = None;
            for &g in &order {
                let model = fit_at(
                    &data,
                    &cfg.solver,
                    &grid[g],
                    CV_TOL,
                    warm.as_ref().map(|m| m.weights()),
                )?;
                let mut fold_sse = 0.0;
                for &i in held {
                    let pred = rows.predict(&model, i)?;
                    fold_sse += (pred - labels[i]) * (pred - labels[i]);
                }
                sse[g] += fold_sse;
                table_cells[g][f] = (fold_sse / held.len() as f64).sqrt();
                warm = Some(model);
            }
        }
    }

    let mut best = 0;
    for g in 1..grid.len() {
        if sse[g] < sse[best] {
            best = g;
        }
    }
    let mut table = Vec::with_capacity(grid.len() * blocks.len());
    for (g, point) in grid.iter().enumerate() {
        for f in 0..blocks.len() {
            table.push(CvRow { point: point.clone(), fold: f, rmse: table_cells[g][f] });
        }
    }
    Ok(CvOutcome {
        best: grid[best].clone(),
        best_rmse: (sse[best] / n as f64).sqrt(),
        table,
    })
}

/// Final tight fit of one observable's model on the full training cache.
pub fn train_observable(
    engine: &FeatureEngine,
    cfg: &ExperimentConfig,
    cache: &FeatureCache,
    labels: &[f64],
    point: &HyperPoint,
) -> Result<RegressionModel64> {
    let rows = cache.rows_for(point)?;
    let all: Vec<usize> = (0..cache.len()).collect();
    let data = rows.dataset(
        &all,
        labels.to_vec(),
        engine.num_features(point)?,
        &engine.point_fingerprint(point),
    )?;
    fit_at(&data, &cfg.solver, point, FINAL_TOL, None)
}

/// Error of one model over one instance set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalStats {
    pub rmse: f64,
    /// Sum of squared residuals (for pooling across observables).
    pub sse: f64,
    pub count: usize,
}

/// Score `model` on `cache` against `labels`.
///
/// The mean squared error is accumulated two independent ways (row-ordered
/// streaming and column-ordered batch); disagreement beyond 1e-12 relative
/// is reported as a numerical failure rather than averaged over.
pub fn evaluate(
    engine: &FeatureEngine,
    model: &RegressionModel64,
    point: &HyperPoint,
    cache: &FeatureCache,
    labels: &[f64],
) -> Result<EvalStats> {
    let rows = cache.rows_for(point)?;
    let all: Vec<usize> = (0..cache.len()).collect();
    let data = rows.dataset(
        &all,
        labels.to_vec(),
        engine.num_features(point)?,
        &engine.point_fingerprint(point),
    )?;
    let batch = data.mse_batch(model)?;
    let streaming = data.mse_streaming(model)?;
    if (batch - streaming).abs() > MSE_CROSS_CHECK_TOL * batch.abs().max(1.0) {
        return Err(Error::numeric(format!(
            "mse accumulation mismatch: batch {batch} vs streaming {streaming}"
        )));
    }
    Ok(EvalStats {
        rmse: batch.sqrt(),
        sse: batch * labels.len() as f64,
        count: labels.len(),
    })
}
