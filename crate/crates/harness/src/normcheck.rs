//! Batch driver for the Pauli 1-norm certificate.
//!
//! Samples random geometrically local observables on the configured
//! lattice and runs the constructive certificate on each, collecting the
//! per-trial evidence (offset weights, test-state traces, operator norms)
//! into one serializable report.

use rand::Rng;
use serde::Serialize;

use gsml_core::error::{Error, Result};
use gsml_core::geometry::{enumerate_geo_paulis, GeoRange, Lattice};
use gsml_core::paulinorm::{fitting_range, verify_norm_inequality};
use gsml_core::{NormCertificate64, PauliSum64};

use crate::config::NormProbeSpec;
use crate::seeding::{derived_rng, Purpose};

/// Report of one probe run.
#[derive(Debug, Serialize)]
pub struct NormReport {
    pub format: String,
    pub lattice: Vec<usize>,
    pub trials: usize,
    pub passed: usize,
    pub block_range: Vec<usize>,
    pub certificates: Vec<NormCertificate64>,
}

/// A random observable: `terms` draws from the geometrically local family
/// with coefficients uniform in `[-1, 1]`.
///
/// Draws of the same string accumulate, so the observable can end up with
/// fewer distinct strings than `terms`.
pub fn random_local_observable<R: Rng>(
    family: &[gsml_core::geometry::PauliString],
    terms: usize,
    rng: &mut R,
) -> PauliSum64 {
    let mut o = PauliSum64::zero();
    for _ in 0..terms {
        let p = family[rng.gen_range(0..family.len())].clone();
        o.add_term(p, rng.gen::<f64>() * 2.0 - 1.0);
    }
    o
}

/// Certify `spec.trials` random observables on `lattice`.
pub fn run_norm_probe(lattice: &Lattice, spec: &NormProbeSpec, seed: u64) -> Result<NormReport> {
    // sample strings from windows strictly inside the default block width,
    // so every draw fits a block
    let family_range = GeoRange::uniform(lattice.dims(), 2)?;
    let family = enumerate_geo_paulis(lattice, &family_range)?;
    let block_range = match &spec.block_range {
        Some(widths) => GeoRange::new(widths.clone())?,
        None => fitting_range(lattice, &family)?,
    };

    let mut certificates = Vec::with_capacity(spec.trials);
    let mut passed = 0;
    for trial in 0..spec.trials {
        let mut rng = derived_rng(seed, Purpose::NormProbe, trial as u64);
        let mut o = random_local_observable(&family, spec.terms, &mut rng);
        while o.is_empty() {
            // exact cancellation is possible in principle; redraw
            o = random_local_observable(&family, spec.terms, &mut rng);
        }
        let cert = verify_norm_inequality(&o, lattice, &block_range)?;
        if cert.pass {
            passed += 1;
        }
        certificates.push(cert);
    }
    Ok(NormReport {
        format: "gsml.norm.v1".into(),
        lattice: lattice.sides().to_vec(),
        trials: spec.trials,
        passed,
        block_range: block_range.per_axis().to_vec(),
        certificates,
    })
}

impl NormReport {
    /// Error out unless every trial passed.
    pub fn require_all_passed(&self) -> Result<()> {
        if self.passed != self.trials {
            return Err(Error::numeric(format!(
                "norm certificate failed on {} of {} trials",
                self.trials - self.passed,
                self.trials
            )));
        }
        Ok(())
    }
}
