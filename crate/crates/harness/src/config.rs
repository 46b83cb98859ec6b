//! Experiment configuration: one JSON document drives every subcommand.
//!
//! A config names the lattice and model family, the dataset sizes, how
//! labels are produced (exact solves or measurement snapshots), the feature
//! map and solver with their hyperparameter grids, and the master seed.
//! Optional sections configure the sweep, the norm-certificate probe, and
//! the locality decay probe. Parsing is strict: unknown fields are
//! rejected, and every documented invariant is checked up front so that a
//! bad config fails before any work starts.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gsml_core::error::{Error, Result};
use gsml_core::geometry::Lattice;
use gsml_core::hamiltonian::TermNormalization;
use gsml_core::ParamHamiltonian64;

/// Where training labels come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Exact ground-state expectation values.
    #[default]
    Exact,
    /// Estimates from randomized measurement snapshots.
    Shadow,
}

/// Feature map choice with its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureMapSpec {
    /// Binary grid-cell indicators over each string's coupling window.
    Indicator {
        /// Window radius: couplings of terms within this lattice distance.
        delta1: usize,
        /// Inverse grid spacing (cells per unit interval half-width).
        delta2_inv: u64,
    },
    /// Random Fourier features over each term's coupling window.
    Rff {
        /// Window radius, as above.
        delta1: usize,
        /// Frequency counts to cross-validate over.
        #[serde(default = "default_r_grid")]
        r_grid: Vec<usize>,
        /// Bandwidth values to cross-validate over.
        #[serde(default = "default_gamma_grid")]
        gamma_grid: Vec<f64>,
        /// Frequency seed; derived from the master seed when absent.
        #[serde(default)]
        feature_seed: Option<u64>,
    },
}

fn default_r_grid() -> Vec<usize> {
    vec![5, 10, 20, 40]
}

fn default_gamma_grid() -> Vec<f64> {
    vec![0.4, 0.5, 0.6, 0.65, 0.7, 0.75]
}

/// Regression solver choice with its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    /// l1-penalized least squares; the penalty grid is cross-validated.
    Penalized {
        #[serde(default = "default_alpha_grid")]
        alpha_grid: Vec<f64>,
    },
    /// l1-ball-constrained least squares at a fixed radius.
    Constrained {
        radius: f64,
        #[serde(default = "default_gap_tol")]
        gap_tol: f64,
    },
}

fn default_alpha_grid() -> Vec<f64> {
    // 2^-8 .. 2^-5
    vec![0.00390625, 0.0078125, 0.015625, 0.03125]
}

fn default_gap_tol() -> f64 {
    1e-3
}

/// What quantity a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Vary the number of measurement snapshots per instance.
    ShadowSizes { values: Vec<usize> },
    /// Vary the training fraction `p` (so `N = floor(p·M)`).
    TrainFractions { values: Vec<f64> },
    /// Vary the lattice itself.
    LatticeSizes {
        values: Vec<Vec<usize>>,
        /// Additionally report errors rescaled so each size's test labels
        /// have the sweep-average standard deviation. Raw values are always
        /// persisted alongside.
        #[serde(default)]
        normalize_std: bool,
    },
}

/// Settings for the `verify-norm` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormProbeSpec {
    /// Number of random observables to certify.
    #[serde(default = "default_norm_trials")]
    pub trials: usize,
    /// Random local terms per observable.
    #[serde(default = "default_norm_terms")]
    pub terms: usize,
    /// Per-axis block width; derived from the sampled strings when absent.
    #[serde(default)]
    pub block_range: Option<Vec<usize>>,
}

fn default_norm_trials() -> usize {
    200
}

fn default_norm_terms() -> usize {
    10
}

impl Default for NormProbeSpec {
    fn default() -> Self {
        NormProbeSpec {
            trials: default_norm_trials(),
            terms: default_norm_terms(),
            block_range: None,
        }
    }
}

/// Settings for the `probe-locality` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalitySpec {
    /// Random instances to probe.
    #[serde(default = "default_probe_instances")]
    pub instances: usize,
    /// Window radii to scan; defaults to `0..=lattice diameter`.
    #[serde(default)]
    pub delta1_grid: Option<Vec<usize>>,
    /// Resample instances until the spectral gap is at least this.
    #[serde(default)]
    pub min_gap: f64,
}

fn default_probe_instances() -> usize {
    10
}

impl Default for LocalitySpec {
    fn default() -> Self {
        LocalitySpec {
            instances: default_probe_instances(),
            delta1_grid: None,
            min_gap: 0.0,
        }
    }
}

/// Everything one experiment needs, deserialized from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Lattice side lengths (one entry per dimension).
    pub lattice: Vec<usize>,
    /// Model family id; only `heisenberg` is implemented.
    #[serde(default = "default_family")]
    pub family: String,
    /// How couplings scale the family's terms.
    #[serde(default = "default_normalization")]
    pub normalization: TermNormalization,
    /// Total instances `M` drawn per dataset.
    pub num_instances: usize,
    /// Training fraction `p`; the train split holds `floor(p·M)` instances.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Explicit train-split size `N`, overriding `train_fraction`.
    #[serde(default)]
    pub num_train: Option<usize>,
    /// Snapshots per instance `T` when labels come from measurements.
    #[serde(default = "default_shadow_size")]
    pub shadow_size: usize,
    /// Label source for training.
    #[serde(default)]
    pub label_mode: LabelMode,
    pub feature_map: FeatureMapSpec,
    pub solver: SolverSpec,
    /// Cross-validation folds.
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Master seed; every random choice derives from it.
    pub seed: u64,
    /// Default output directory (the CLI flag overrides it).
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Target site pairs; defaults to every lattice edge.
    #[serde(default)]
    pub observables: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub norm_probe: Option<NormProbeSpec>,
    #[serde(default)]
    pub locality: Option<LocalitySpec>,
}

fn default_family() -> String {
    "heisenberg".to_owned()
}

fn default_normalization() -> TermNormalization {
    TermNormalization::Raw
}

fn default_train_fraction() -> f64 {
    0.5
}

fn default_shadow_size() -> usize {
    500
}

fn default_folds() -> usize {
    4
}

impl ExperimentConfig {
    /// Load and validate a config file. Any failure — unreadable file,
    /// malformed JSON, unknown field, violated invariant — is reported as
    /// an argument error so the CLI exits with the config-error code.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| Error::arg(format!("cannot open config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::arg(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every invariant a config promises.
    pub fn validate(&self) -> Result<()> {
        let lattice = self.build_lattice(&self.lattice)?;
        if self.family != "heisenberg" {
            return Err(Error::arg(format!(
                "unknown model family {:?} (only \"heisenberg\" is implemented)",
                self.family
            )));
        }
        if self.num_instances == 0 {
            return Err(Error::arg("num_instances must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::arg("train_fraction must lie in (0, 1]"));
        }
        let n = self.num_train();
        if n == 0 || n > self.num_instances {
            return Err(Error::arg(format!(
                "train size {n} must lie in 1..={}",
                self.num_instances
            )));
        }
        if self.shadow_size == 0 {
            return Err(Error::arg("shadow_size must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::arg("folds must be at least 2"));
        }
        match &self.feature_map {
            FeatureMapSpec::Indicator { delta2_inv, .. } => {
                if *delta2_inv == 0 {
                    return Err(Error::arg("delta2_inv must be at least 1"));
                }
            }
            FeatureMapSpec::Rff { r_grid, gamma_grid, .. } => {
                if r_grid.is_empty() || gamma_grid.is_empty() {
                    return Err(Error::arg("feature grids must be non-empty"));
                }
                if r_grid.contains(&0) {
                    return Err(Error::arg("frequency counts must be positive"));
                }
                if gamma_grid.iter().any(|&g| !(g > 0.0)) {
                    return Err(Error::arg("bandwidths must be positive"));
                }
            }
        }
        match &self.solver {
            SolverSpec::Penalized { alpha_grid } => {
                if alpha_grid.is_empty() {
                    return Err(Error::arg("alpha_grid must be non-empty"));
                }
                if alpha_grid.iter().any(|&a| !(a > 0.0)) {
                    return Err(Error::arg("penalty weights must be positive"));
                }
            }
            SolverSpec::Constrained { radius, gap_tol } => {
                if !(*radius >= 0.0) {
                    return Err(Error::arg("radius must be non-negative"));
                }
                if !(*gap_tol > 0.0) {
                    return Err(Error::arg("gap_tol must be positive"));
                }
            }
        }
        if let Some(pairs) = &self.observables {
            if pairs.is_empty() {
                return Err(Error::arg("observables list must be non-empty when given"));
            }
            for &(i, j) in pairs {
                if i == j || i >= lattice.num_sites() || j >= lattice.num_sites() {
                    return Err(Error::arg(format!(
                        "observable pair ({i}, {j}) is not two distinct sites on the lattice"
                    )));
                }
            }
        }
        match &self.sweep {
            Some(SweepSpec::ShadowSizes { values }) => {
                if values.is_empty() || values.contains(&0) {
                    return Err(Error::arg("shadow size sweep needs positive values"));
                }
                if self.label_mode != LabelMode::Shadow {
                    return Err(Error::arg(
                        "a shadow size sweep requires label_mode = \"shadow\"",
                    ));
                }
            }
            Some(SweepSpec::TrainFractions { values }) => {
                if values.is_empty() || values.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                    return Err(Error::arg(
                        "swept train fractions must lie in (0, 1) so a test set remains",
                    ));
                }
            }
            Some(SweepSpec::LatticeSizes { values, .. }) => {
                if values.is_empty() {
                    return Err(Error::arg("lattice size sweep needs at least one size"));
                }
                for sides in values {
                    self.build_lattice(sides)?;
                }
                if self.observables.is_some() {
                    return Err(Error::arg(
                        "explicit observables cannot be combined with a lattice size sweep",
                    ));
                }
            }
            None => {}
        }
        if self.sweep.is_some() && self.num_train() >= self.num_instances {
            return Err(Error::arg(
                "sweeps need a non-empty test split: make num_train smaller than num_instances",
            ));
        }
        if let Some(p) = &self.norm_probe {
            if p.trials == 0 || p.terms == 0 {
                return Err(Error::arg("norm probe needs positive trials and terms"));
            }
            if let Some(r) = &p.block_range {
                if r.len() != lattice.dims() || r.contains(&0) {
                    return Err(Error::arg(
                        "block_range needs one positive width per lattice axis",
                    ));
                }
            }
        }
        if let Some(l) = &self.locality {
            if l.instances == 0 {
                return Err(Error::arg("locality probe needs at least one instance"));
            }
            if let Some(grid) = &l.delta1_grid {
                if grid.is_empty() {
                    return Err(Error::arg("delta1_grid must be non-empty when given"));
                }
            }
            if !(l.min_gap >= 0.0) {
                return Err(Error::arg("min_gap must be non-negative"));
            }
        }
        Ok(())
    }

    fn build_lattice(&self, sides: &[usize]) -> Result<Lattice> {
        if sides.is_empty() {
            return Err(Error::arg("lattice needs at least one side length"));
        }
        let lattice = Lattice::new(sides.to_vec())?;
        if lattice.num_sites() < 2 {
            return Err(Error::arg("lattice needs at least two sites"));
        }
        Ok(lattice)
    }

    /// Train-split size `N`.
    pub fn num_train(&self) -> usize {
        self.num_train
            .unwrap_or_else(|| ((self.train_fraction * self.num_instances as f64).floor() as usize).max(1))
    }

    /// The configured lattice.
    pub fn lattice(&self) -> Result<Lattice> {
        self.build_lattice(&self.lattice)
    }

    /// The configured Hamiltonian family on `lattice`.
    pub fn hamiltonian_on(&self, lattice: &Lattice) -> Result<ParamHamiltonian64> {
        ParamHamiltonian64::heisenberg(lattice, self.normalization)
    }

    /// Target site pairs on `ham`'s lattice: the configured list, or every
    /// lattice edge.
    pub fn observables_on(&self, ham: &ParamHamiltonian64) -> Vec<(usize, usize)> {
        match &self.observables {
            Some(pairs) => pairs.clone(),
            None => ham.lattice().edges(),
        }
    }

    /// Canonical JSON used for manifests and config echoes.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("config serialization failed: {e}")))
    }
}
