//! Dataset generation and loading: coupling draws, exact labels, and
//! measurement snapshot files, all derived from one master seed.
//!
//! A dataset directory contains
//!
//! * `instances.csv` — one row per instance with its raw couplings;
//! * `labels_exact.csv` — exact ground-state expectation values for every
//!   target site pair, kept even when training uses snapshot labels (they
//!   are the ground truth every evaluation scores against);
//! * `shadows/instance_<id>.bin` — optional per-instance snapshot records;
//! * `dataset.json` — a manifest tying the pieces together.
//!
//! Instance `id` draws its couplings from the `Instances` seed stream at
//! index `id` and its snapshots from the `Shadows` stream at index `id`, so
//! datasets generated with the same seed agree byte for byte regardless of
//! which subsets other runs consumed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gsml_core::error::{Error, Result};
use gsml_core::hamiltonian::correlation_observable;
use gsml_core::shadows::{sample_shadow, ShadowSet};
use gsml_core::{ParamHamiltonian64, PauliSum64};

use crate::csvio;
use crate::seeding::{derived_seed, Purpose};

/// Manifest stored next to the generated files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub family: String,
    pub lattice: Vec<usize>,
    pub num_instances: usize,
    pub num_params: usize,
    pub observables: Vec<(usize, usize)>,
    pub seed: u64,
    /// Snapshots per instance, when shadow files were written.
    pub shadow_size: Option<usize>,
}

const MANIFEST_FORMAT: &str = "gsml.dataset.v1";

fn instances_header(num_params: usize) -> String {
    let mut h = String::from("instance_id");
    for k in 0..num_params {
        h.push_str(&format!(",param_{k}"));
    }
    h
}

const LABELS_HEADER: &str = "instance_id,site_i,site_j,value";

/// Correlation observables for the target pairs.
pub fn target_observables(pairs: &[(usize, usize)]) -> Result<Vec<PauliSum64>> {
    pairs
        .iter()
        .map(|&(i, j)| correlation_observable(i, j))
        .collect()
}

/// Generate a dataset under `dir`.
///
/// Draws `num_instances` coupling vectors, solves each ground state, writes
/// exact labels for `pairs`, and (when `shadow_size` is set) samples and
/// stores that many snapshots per instance.
pub fn generate(
    ham: &ParamHamiltonian64,
    pairs: &[(usize, usize)],
    num_instances: usize,
    seed: u64,
    shadow_size: Option<usize>,
    dir: &Path,
) -> Result<DatasetManifest> {
    if num_instances == 0 {
        return Err(Error::arg("need at least one instance"));
    }
    if pairs.is_empty() {
        return Err(Error::arg("need at least one target pair"));
    }
    let observables = target_observables(pairs)?;
    fs::create_dir_all(dir)?;
    let shadow_dir = dir.join("shadows");
    if shadow_size.is_some() {
        fs::create_dir_all(&shadow_dir)?;
    }

    let mut instance_rows = Vec::with_capacity(num_instances);
    let mut label_rows = Vec::with_capacity(num_instances * pairs.len());
    for id in 0..num_instances {
        let x = ham.sample_instance(derived_seed(seed, Purpose::Instances, id as u64));
        let gs = ham.ground_state(&x)?;
        let mut row = vec![id.to_string()];
        row.extend(x.iter().map(|&v| csvio::fmt_f64(v)));
        instance_rows.push(row);
        for (&(i, j), o) in pairs.iter().zip(&observables) {
            let value = gs.expectation(o)?;
            label_rows.push(vec![
                id.to_string(),
                i.to_string(),
                j.to_string(),
                csvio::fmt_f64(value),
            ]);
        }
        if let Some(t) = shadow_size {
            let set = sample_shadow(&gs, t, derived_seed(seed, Purpose::Shadows, id as u64))?;
            set.write_binary(&shadow_dir.join(format!("instance_{id}.bin")))?;
        }
    }
    csvio::write_csv(
        dir.join("instances.csv"),
        "instances",
        &instances_header(ham.num_params()),
        &instance_rows,
    )?;
    csvio::write_csv(dir.join("labels_exact.csv"), "labels", LABELS_HEADER, &label_rows)?;

    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.to_owned(),
        family: ham.family().to_owned(),
        lattice: ham.lattice().sides().to_vec(),
        num_instances,
        num_params: ham.num_params(),
        observables: pairs.to_vec(),
        seed,
        shadow_size,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("dataset.json"), text + "\n")?;
    Ok(manifest)
}

/// A dataset read back from disk.
#[derive(Debug)]
pub struct LoadedDataset {
    manifest: DatasetManifest,
    /// Raw couplings, `[instance][param]`.
    couplings: Vec<Vec<f64>>,
    /// Exact labels, `[instance][pair]`, ordered like the manifest pairs.
    exact: Vec<Vec<f64>>,
    dir: PathBuf,
}

impl LoadedDataset {
    /// Read a directory written by [`generate`], checking it against the
    /// family it will be used with.
    pub fn load(dir: &Path, ham: &ParamHamiltonian64) -> Result<LoadedDataset> {
        let text = fs::read_to_string(dir.join("dataset.json"))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("dataset manifest: {e}")))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::format(format!(
                "dataset manifest has format {:?}, expected {MANIFEST_FORMAT:?}",
                manifest.format
            )));
        }
        if manifest.family != ham.family()
            || manifest.lattice != ham.lattice().sides()
            || manifest.num_params != ham.num_params()
        {
            return Err(Error::arg(format!(
                "dataset at {} was generated for {} on {:?}, not this family",
                dir.display(),
                manifest.family,
                manifest.lattice
            )));
        }

        let rows = csvio::read_csv(
            dir.join("instances.csv"),
            "instances",
            &instances_header(manifest.num_params),
        )?;
        if rows.len() != manifest.num_instances {
            return Err(Error::format(format!(
                "instances.csv has {} rows, manifest says {}",
                rows.len(),
                manifest.num_instances
            )));
        }
        let mut couplings = Vec::with_capacity(rows.len());
        for (id, row) in rows.iter().enumerate() {
            if csvio::field_usize(row, 0)? != id {
                return Err(Error::format("instance ids must be 0..M in order"));
            }
            let x: Result<Vec<f64>> =
                (0..manifest.num_params).map(|k| csvio::field_f64(row, k + 1)).collect();
            couplings.push(x?);
        }

        let label_rows = csvio::read_csv(dir.join("labels_exact.csv"), "labels", LABELS_HEADER)?;
        let pairs = &manifest.observables;
        if label_rows.len() != manifest.num_instances * pairs.len() {
            return Err(Error::format("label row count does not match the manifest"));
        }
        let mut exact = vec![vec![f64::NAN; pairs.len()]; manifest.num_instances];
        for (idx, row) in label_rows.iter().enumerate() {
            let id = csvio::field_usize(row, 0)?;
            let i = csvio::field_usize(row, 1)?;
            let j = csvio::field_usize(row, 2)?;
            let expected_pair = pairs[idx % pairs.len()];
            if id != idx / pairs.len() || (i, j) != expected_pair {
                return Err(Error::format("label rows out of order"));
            }
            exact[id][idx % pairs.len()] = csvio::field_f64(row, 3)?;
        }
        Ok(LoadedDataset {
            manifest,
            couplings,
            exact,
            dir: dir.to_path_buf(),
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn num_instances(&self) -> usize {
        self.manifest.num_instances
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.manifest.observables
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    /// Exact label of `instance` for target pair `pair_idx`.
    pub fn exact_label(&self, instance: usize, pair_idx: usize) -> f64 {
        self.exact[instance][pair_idx]
    }

    /// All exact labels of one target pair, over instances.
    pub fn exact_column(&self, pair_idx: usize) -> Vec<f64> {
        self.exact.iter().map(|row| row[pair_idx]).collect()
    }

    /// The stored snapshot set of one instance.
    pub fn shadow(&self, instance: usize) -> Result<ShadowSet> {
        let path = self.dir.join("shadows").join(format!("instance_{instance}.bin"));
        ShadowSet::read_binary(&path)
    }

    /// Snapshot-estimated labels `[instance][pair]` using the first `t`
    /// snapshots of each stored set.
    ///
    /// Using prefixes (rather than fresh draws per `t`) pairs the label
    /// noise across snapshot budgets, which is what makes budget sweeps
    /// comparable point to point.
    pub fn shadow_labels(&self, t: usize, pairs: &[(usize, usize)]) -> Result<Vec<Vec<f64>>> {
        let observables = target_observables(pairs)?;
        let mut out = Vec::with_capacity(self.num_instances());
        for id in 0..self.num_instances() {
            let set = self.shadow(id)?;
            let prefix = set.prefix(t)?;
            let row: Result<Vec<f64>> =
                observables.iter().map(|o| prefix.estimate_observable(o)).collect();
            out.push(row?);
        }
        Ok(out)
    }
}

/// Generate `dir` if missing, then load it. Existing directories are
/// validated against the family rather than regenerated, so repeated runs
/// reuse their data; delete the directory to force a fresh draw.
#[allow(clippy::too_many_arguments)]
pub fn ensure(
    ham: &ParamHamiltonian64,
    pairs: &[(usize, usize)],
    num_instances: usize,
    seed: u64,
    shadow_size: Option<usize>,
    dir: &Path,
) -> Result<LoadedDataset> {
    if !dir.join("dataset.json").exists() {
        generate(ham, pairs, num_instances, seed, shadow_size, dir)?;
    }
    let data = LoadedDataset::load(dir, ham)?;
    if data.num_instances() < num_instances {
        return Err(Error::arg(format!(
            "dataset at {} has {} instances, need {num_instances}; delete it to regenerate",
            dir.display(),
            data.num_instances()
        )));
    }
    if shadow_size.is_some() && data.manifest.shadow_size.map_or(true, |t| t < shadow_size.unwrap())
    {
        return Err(Error::arg(format!(
            "dataset at {} lacks snapshots of size {}; delete it to regenerate",
            dir.display(),
            shadow_size.unwrap()
        )));
    }
    Ok(data)
}
