//! l1-regularized least squares over sparse or dense feature rows.
//!
//! Two formulations are provided:
//!
//! * [`fit_penalized`] — minimize `(1/2N)·||y - Xw||² + α·||w||₁` by cyclic
//!   coordinate descent with soft-thresholding. The returned trace carries
//!   the worst violation of the stationarity conditions, so optimality is
//!   checkable after the fact.
//! * [`fit_constrained`] — minimize `(1/N)·||Xw - y||²` over the l1 ball
//!   `||w||₁ ≤ B` by the Frank-Wolfe method with exact line search. The
//!   trace carries the final duality gap, an upper bound on the objective
//!   suboptimality.
//!
//! Feature indices are 64-bit: one-hot grid maps address a huge virtual
//! feature space of which only the cells present in the data matter, so a
//! [`Dataset`] compacts the observed columns internally and models store
//! weights against the original indices.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::IndicatorMap;
use crate::scalar::{fp, Scalar};

/// Feature rows plus labels, compacted by observed column.
#[derive(Debug, Clone)]
pub struct Dataset<F: Scalar> {
    /// Original ids of the observed columns, ascending.
    col_ids: Vec<u64>,
    /// Column-major entries: `(row, value)` lists per observed column.
    columns: Vec<Vec<(u32, F)>>,
    labels: Vec<F>,
    /// Size of the virtual feature space the rows were drawn from.
    num_features: u64,
    /// Digest of the feature map that produced the rows.
    fingerprint: String,
}

impl<F: Scalar> Dataset<F> {
    /// Build from sparse rows of `(feature id, value)` pairs.
    ///
    /// Ids may repeat across rows but must be strictly ascending within a
    /// row. `num_features` is the virtual feature-space size; every id must
    /// lie below it.
    pub fn from_sparse_rows(
        rows: &[Vec<(u64, F)>],
        labels: Vec<F>,
        num_features: u64,
        fingerprint: &str,
    ) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::arg(format!(
                "{} rows against {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.len() > u32::MAX as usize {
            return Err(Error::capacity("row count exceeds u32 indexing"));
        }
        let mut col_ids: Vec<u64> = Vec::new();
        for row in rows {
            for pair in row.windows(2) {
                if pair[0].0 >= pair[1].0 {
                    return Err(Error::arg("row feature ids must be strictly ascending"));
                }
            }
            for &(id, _) in row {
                if id >= num_features {
                    return Err(Error::arg(format!(
                        "feature id {id} outside the {num_features}-feature space"
                    )));
                }
                col_ids.push(id);
            }
        }
        col_ids.sort_unstable();
        col_ids.dedup();
        let mut columns = vec![Vec::new(); col_ids.len()];
        for (r, row) in rows.iter().enumerate() {
            for &(id, v) in row {
                let j = col_ids.binary_search(&id).expect("id collected above");
                columns[j].push((r as u32, v));
            }
        }
        Ok(Dataset {
            col_ids,
            columns,
            labels,
            num_features,
            fingerprint: fingerprint.to_string(),
        })
    }

    /// Build from dense rows of equal length.
    pub fn from_dense_rows(rows: &[Vec<F>], labels: Vec<F>, fingerprint: &str) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::arg(format!(
                "{} rows against {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::arg("dense rows must all have the same length"));
        }
        if rows.len() > u32::MAX as usize {
            return Err(Error::capacity("row count exceeds u32 indexing"));
        }
        let col_ids: Vec<u64> = (0..m as u64).collect();
        let mut columns = vec![Vec::new(); m];
        for (r, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != F::zero() {
                    columns[j].push((r as u32, v));
                }
            }
        }
        Ok(Dataset {
            col_ids,
            columns,
            labels,
            num_features: m as u64,
            fingerprint: fingerprint.to_string(),
        })
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    /// Size of the virtual feature space (not the observed column count).
    pub fn num_features(&self) -> u64 {
        self.num_features
    }

    /// Observed (nonzero somewhere) column count.
    pub fn num_observed_columns(&self) -> usize {
        self.col_ids.len()
    }

    pub fn labels(&self) -> &[F] {
        &self.labels
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Predictions `Xw` for a model fitted on the same feature space.
    pub fn predict(&self, model: &RegressionModel<F>) -> Result<Vec<F>> {
        if model.fingerprint != self.fingerprint {
            return Err(Error::arg(format!(
                "model fingerprint {} does not match dataset {}",
                model.fingerprint, self.fingerprint
            )));
        }
        let mut out = vec![F::zero(); self.num_rows()];
        for &(id, w) in &model.weights {
            if let Ok(j) = self.col_ids.binary_search(&id) {
                for &(r, v) in &self.columns[j] {
                    out[r as usize] += w * v;
                }
            }
        }
        Ok(out)
    }

    /// Mean squared error `(1/N)·||y - Xw||²` via a single batch residual.
    pub fn mse_batch(&self, model: &RegressionModel<F>) -> Result<F> {
        let pred = self.predict(model)?;
        let mut acc = F::zero();
        for (p, &y) in pred.iter().zip(&self.labels) {
            let d = *p - y;
            acc += d * d;
        }
        Ok(acc / fp::<F>(self.num_rows() as f64))
    }

    /// Mean squared error accumulated row by row (for cross-checking the
    /// batch path; the two must agree to rounding).
    pub fn mse_streaming(&self, model: &RegressionModel<F>) -> Result<F> {
        if model.fingerprint != self.fingerprint {
            return Err(Error::arg("model and dataset fingerprints differ"));
        }
        // stream over rows reconstructed from the column store
        let mut pred = vec![F::zero(); self.num_rows()];
        for &(id, w) in &model.weights {
            if let Ok(j) = self.col_ids.binary_search(&id) {
                for &(r, v) in &self.columns[j] {
                    pred[r as usize] += w * v;
                }
            }
        }
        let n = fp::<F>(self.num_rows() as f64);
        let mut acc = F::zero();
        for r in 0..self.num_rows() {
            let d = pred[r] - self.labels[r];
            acc += d * d / n;
        }
        Ok(acc)
    }

    /// `(1/N)·||X_j||²` per observed column.
    fn column_sq_norms(&self) -> Vec<F> {
        let n = fp::<F>(self.num_rows() as f64);
        self.columns
            .iter()
            .map(|col| {
                let mut acc = F::zero();
                for &(_, v) in col {
                    acc += v * v;
                }
                acc / n
            })
            .collect()
    }
}

/// Which objective a model was fitted under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitMode<F> {
    /// `(1/2N)·||y - Xw||² + alpha·||w||₁`
    Penalized { alpha: F },
    /// `(1/N)·||Xw - y||²` subject to `||w||₁ ≤ radius`
    Constrained { radius: F },
}

/// Post-fit optimality evidence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitTrace<F> {
    /// Sweeps (coordinate descent) or iterations (Frank-Wolfe) executed.
    pub iterations: usize,
    /// Worst stationarity violation (penalized) or final duality gap
    /// (constrained).
    pub certificate: F,
    /// Whether the stopping tolerance was met before the iteration cap.
    pub converged: bool,
}

/// A fitted sparse linear model over a (possibly huge virtual) feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RegressionModel<F: Scalar> {
    mode: FitMode<F>,
    /// `(feature id, weight)` pairs, ascending by id, nonzero weights only.
    weights: Vec<(u64, F)>,
    num_features: u64,
    fingerprint: String,
    trace: FitTrace<F>,
}

impl<F: Scalar> RegressionModel<F> {
    pub fn mode(&self) -> FitMode<F> {
        self.mode
    }

    pub fn weights(&self) -> &[(u64, F)] {
        &self.weights
    }

    pub fn num_nonzero(&self) -> usize {
        self.weights.len()
    }

    pub fn num_features(&self) -> u64 {
        self.num_features
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn trace(&self) -> FitTrace<F> {
        self.trace
    }

    pub fn one_norm(&self) -> F {
        let mut acc = F::zero();
        for &(_, w) in &self.weights {
            acc += w.abs();
        }
        acc
    }

    /// Predict one sparse row (ids strictly ascending).
    pub fn predict_sparse(&self, row: &[(u64, F)]) -> F {
        let mut acc = F::zero();
        let mut wi = 0;
        for &(id, v) in row {
            while wi < self.weights.len() && self.weights[wi].0 < id {
                wi += 1;
            }
            if wi == self.weights.len() {
                break;
            }
            if self.weights[wi].0 == id {
                acc += self.weights[wi].1 * v;
            }
        }
        acc
    }

    /// Predict one dense row.
    pub fn predict_dense(&self, row: &[F]) -> Result<F> {
        if row.len() as u64 != self.num_features {
            return Err(Error::arg(format!(
                "row has {} entries, model spans {}",
                row.len(),
                self.num_features
            )));
        }
        let mut acc = F::zero();
        for &(id, w) in &self.weights {
            acc += w * row[id as usize];
        }
        Ok(acc)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::format(format!("model serialization failed: {e}")))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::format(format!("model parse failed: {e}")))
    }
}

/// Knobs for [`fit_penalized`].
#[derive(Debug, Clone, Copy)]
pub struct PenalizedOptions<F> {
    pub alpha: F,
    /// Stop when no coordinate moves more than this in one sweep.
    pub tol: F,
    pub max_sweeps: usize,
}

impl<F: Scalar> PenalizedOptions<F> {
    pub fn new(alpha: F) -> Self {
        PenalizedOptions {
            alpha,
            tol: fp::<F>(1e-8),
            max_sweeps: 50_000,
        }
    }
}

/// Cyclic coordinate descent for `(1/2N)·||y - Xw||² + alpha·||w||₁`.
///
/// The trace certificate is the worst stationarity violation over all
/// observed columns: `max_j(|g_j| - alpha)₊` for zero weights and
/// `|g_j - alpha·sign(w_j)|` for active ones, with `g_j = (1/N)·X_jᵀ·(y-Xw)`.
/// At an exact optimum it is zero; after convergence it is at most a small
/// multiple of the tolerance.
pub fn fit_penalized<F: Scalar>(
    data: &Dataset<F>,
    options: &PenalizedOptions<F>,
) -> Result<RegressionModel<F>> {
    fit_penalized_warm(data, options, &[])
}

/// [`fit_penalized`] started from a previous solution instead of zero.
///
/// `start` holds `(feature id, weight)` pairs sorted by id, as produced by
/// [`RegressionModel::weights`]; ids absent from the dataset's observed
/// columns are ignored. Warm starts do not change the fixed point, only how
/// fast coordinate descent reaches it, which makes them useful when solving
/// along a penalty grid.
pub fn fit_penalized_warm<F: Scalar>(
    data: &Dataset<F>,
    options: &PenalizedOptions<F>,
    start: &[(u64, F)],
) -> Result<RegressionModel<F>> {
    if options.alpha <= F::zero() {
        return Err(Error::arg("penalty weight must be positive"));
    }
    if options.tol <= F::zero() {
        return Err(Error::arg("tolerance must be positive"));
    }
    let n_inv = F::one() / fp::<F>(data.num_rows() as f64);
    let sq_norms = data.column_sq_norms();
    let mut w = vec![F::zero(); data.columns.len()];
    for &(id, weight) in start {
        if let Ok(j) = data.col_ids.binary_search(&id) {
            w[j] = weight;
        }
    }
    let mut residual: Vec<F> = data.labels.clone();
    for (j, &wj) in w.iter().enumerate() {
        if wj != F::zero() {
            for &(r, v) in &data.columns[j] {
                residual[r as usize] -= wj * v;
            }
        }
    }
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_step = F::zero();
        for j in 0..data.columns.len() {
            let c = sq_norms[j];
            if c == F::zero() {
                continue;
            }
            let mut corr = F::zero();
            for &(r, v) in &data.columns[j] {
                corr += v * residual[r as usize];
            }
            // correlation with the residual if w_j were zeroed
            let rho = corr * n_inv + c * w[j];
            let new = soft_threshold(rho, options.alpha) / c;
            let step = new - w[j];
            if step != F::zero() {
                for &(r, v) in &data.columns[j] {
                    residual[r as usize] -= step * v;
                }
                w[j] = new;
                max_step = max_step.max(step.abs() * c.sqrt());
            }
        }
        if max_step < options.tol {
            converged = true;
            break;
        }
    }
    // stationarity violations on the final iterate
    let mut worst = F::zero();
    for j in 0..data.columns.len() {
        let mut corr = F::zero();
        for &(r, v) in &data.columns[j] {
            corr += v * residual[r as usize];
        }
        let g = corr * n_inv;
        let violation = if w[j] == F::zero() {
            (g.abs() - options.alpha).max(F::zero())
        } else {
            let sign = if w[j] > F::zero() { F::one() } else { -F::one() };
            (g - options.alpha * sign).abs()
        };
        worst = worst.max(violation);
    }
    let weights = data
        .col_ids
        .iter()
        .zip(&w)
        .filter(|&(_, &wj)| wj != F::zero())
        .map(|(&id, &wj)| (id, wj))
        .collect();
    Ok(RegressionModel {
        mode: FitMode::Penalized { alpha: options.alpha },
        weights,
        num_features: data.num_features,
        fingerprint: data.fingerprint.clone(),
        trace: FitTrace {
            iterations: sweeps,
            certificate: worst,
            converged,
        },
    })
}

#[inline]
fn soft_threshold<F: Scalar>(z: F, alpha: F) -> F {
    if z > alpha {
        z - alpha
    } else if z < -alpha {
        z + alpha
    } else {
        F::zero()
    }
}

/// Knobs for [`fit_constrained`].
#[derive(Debug, Clone, Copy)]
pub struct ConstrainedOptions<F> {
    /// l1-ball radius.
    pub radius: F,
    /// Stop once the duality gap drops below this.
    pub gap_tol: F,
    pub max_iters: usize,
}

impl<F: Scalar> ConstrainedOptions<F> {
    pub fn new(radius: F, gap_tol: F) -> Self {
        ConstrainedOptions {
            radius,
            gap_tol,
            max_iters: 200_000,
        }
    }
}

/// Frank-Wolfe for `(1/N)·||Xw - y||²` over `||w||₁ ≤ radius`.
///
/// Each step moves toward the ball vertex most aligned with the negative
/// gradient, with an exact line search. The trace certificate is the final
/// duality gap `∇g(w)·(w - v)`, which upper-bounds how far the objective is
/// from its constrained minimum.
pub fn fit_constrained<F: Scalar>(
    data: &Dataset<F>,
    options: &ConstrainedOptions<F>,
) -> Result<RegressionModel<F>> {
    if options.radius < F::zero() {
        return Err(Error::arg("l1 radius must be nonnegative"));
    }
    if options.gap_tol <= F::zero() {
        return Err(Error::arg("gap tolerance must be positive"));
    }
    let n_inv = F::one() / fp::<F>(data.num_rows() as f64);
    let two = fp::<F>(2.0);
    let mut w = vec![F::zero(); data.columns.len()];
    let mut xw = vec![F::zero(); data.num_rows()];
    let mut gap = F::zero();
    let mut iterations = 0;
    // zero radius makes the ball a point: the zero model is already optimal
    let mut converged = options.radius == F::zero();
    if !converged {
        while iterations < options.max_iters {
            iterations += 1;
            // gradient of (1/N)||Xw - y||²: (2/N)·Xᵀ(Xw - y)
            let mut best_j = 0;
            let mut best_abs = F::zero();
            let mut grad = vec![F::zero(); data.columns.len()];
            for j in 0..data.columns.len() {
                let mut acc = F::zero();
                for &(r, v) in &data.columns[j] {
                    acc += v * (xw[r as usize] - data.labels[r as usize]);
                }
                let g = two * n_inv * acc;
                grad[j] = g;
                if g.abs() > best_abs {
                    best_abs = g.abs();
                    best_j = j;
                }
            }
            // duality gap against the best vertex v = -radius·sign(grad)·e_j
            let mut w_dot_grad = F::zero();
            for j in 0..data.columns.len() {
                w_dot_grad += w[j] * grad[j];
            }
            gap = w_dot_grad + options.radius * best_abs;
            if gap <= options.gap_tol {
                converged = true;
                break;
            }
            // direction d = v - w; compute Xd from the target vertex
            let target = if grad[best_j] > F::zero() {
                -options.radius
            } else {
                options.radius
            };
            let mut xd: Vec<F> = xw.iter().map(|&p| -p).collect();
            for &(r, v) in &data.columns[best_j] {
                xd[r as usize] += target * v;
            }
            // exact line search for (1/N)||Xw - y + η·Xd||² over η ∈ [0, 1]
            let mut num = F::zero();
            let mut den = F::zero();
            for r in 0..xw.len() {
                num += xd[r] * (xw[r] - data.labels[r]);
                den += xd[r] * xd[r];
            }
            if den == F::zero() {
                converged = true;
                break;
            }
            let eta = (-num / den).max(F::zero()).min(F::one());
            if eta == F::zero() {
                // no descent along the direction: the gap is already tight
                converged = gap <= options.gap_tol;
                break;
            }
            let shrink = F::one() - eta;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            w[best_j] += eta * target;
            for r in 0..xw.len() {
                xw[r] += eta * xd[r];
            }
        }
    }
    let weights = data
        .col_ids
        .iter()
        .zip(&w)
        .filter(|&(_, &wj)| wj != F::zero())
        .map(|(&id, &wj)| (id, wj))
        .collect();
    Ok(RegressionModel {
        mode: FitMode::Constrained { radius: options.radius },
        weights,
        num_features: data.num_features,
        fingerprint: data.fingerprint.clone(),
        trace: FitTrace {
            iterations,
            certificate: gap,
            converged,
        },
    })
}

/// l1-ball radius sufficient for an indicator-map model of an observable
/// with Pauli coefficient 1-norm `alpha_one_norm`.
///
/// Each block's ideal weights are the observable's per-string expectations
/// at the cell centers, so their 1-norm is at most the coefficient 1-norm
/// times the largest cell count of any block.
pub fn constrained_radius_hint<F: Scalar>(map: &IndicatorMap<F>, alpha_one_norm: F) -> F {
    let max_cells = map.blocks().iter().map(|b| b.cells()).max().unwrap_or(0);
    alpha_one_norm * fp::<F>(max_cells as f64)
}
