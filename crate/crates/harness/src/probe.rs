//! Locality decay probe: how much does a correlation actually depend on
//! far-away couplings?
//!
//! For a target pair the probe compares the exact expectation under the
//! full coupling vector against the expectation when every coupling
//! farther than `delta1` from the pair is reset to the center of the
//! coupling box. If correlations are local, the gap dies quickly as
//! `delta1` grows — this is the empirical justification for feature maps
//! that only read nearby couplings.

use gsml_core::error::{Error, Result};
use gsml_core::features::nearby_params;
use gsml_core::hamiltonian::correlation_observable;
use gsml_core::ParamHamiltonian64;

/// Raw coupling value a suppressed parameter is reset to: the center of
/// the sampling box, i.e. zero in centered coordinates.
pub const NEUTRAL_COUPLING: f64 = 1.0;

/// `x` with every parameter outside `keep` reset to [`NEUTRAL_COUPLING`].
pub fn restricted_couplings(x: &[f64], keep: &[usize]) -> Vec<f64> {
    let mut out = vec![NEUTRAL_COUPLING; x.len()];
    for &k in keep {
        out[k] = x[k];
    }
    out
}

/// Expectation of the pair correlation in the ground state of the
/// restricted instance.
pub fn restricted_expectation(
    ham: &ParamHamiltonian64,
    pair: (usize, usize),
    x: &[f64],
    keep: &[usize],
) -> Result<f64> {
    let o = correlation_observable(pair.0, pair.1)?;
    let restricted = restricted_couplings(x, keep);
    ham.ground_state(&restricted)?.expectation(&o)
}

/// One row of the decay table.
#[derive(Debug, Clone, Copy)]
pub struct DecayRow {
    pub delta1: usize,
    /// Parameters kept (within `delta1` of the pair).
    pub kept: usize,
    /// `|⟨C⟩ full − ⟨C⟩ restricted|`.
    pub err: f64,
}

/// Decay table of one `(instance, pair)` over a `delta1` grid.
pub fn locality_curve(
    ham: &ParamHamiltonian64,
    pair: (usize, usize),
    x: &[f64],
    delta1_grid: &[usize],
) -> Result<Vec<DecayRow>> {
    if delta1_grid.is_empty() {
        return Err(Error::arg("need at least one delta1 value"));
    }
    let o = correlation_observable(pair.0, pair.1)?;
    let full = ham.ground_state(x)?.expectation(&o)?;
    let support = [pair.0, pair.1];
    let mut rows = Vec::with_capacity(delta1_grid.len());
    for &d in delta1_grid {
        let keep = nearby_params(ham, &support, d)?;
        let restricted = restricted_expectation(ham, pair, x, &keep)?;
        rows.push(DecayRow { delta1: d, kept: keep.len(), err: (full - restricted).abs() });
    }
    Ok(rows)
}

/// Longest graph distance between any two sites (so a window of this
/// radius keeps everything).
pub fn lattice_diameter(ham: &ParamHamiltonian64) -> usize {
    let lat = ham.lattice();
    let n = lat.num_sites();
    let mut best = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            best = best.max(lat.qubit_distance(a, b));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsml_core::geometry::Lattice;
    use gsml_core::hamiltonian::TermNormalization;

    fn chain_family(n: usize) -> ParamHamiltonian64 {
        let lat = Lattice::chain(n).unwrap();
        ParamHamiltonian64::heisenberg(&lat, TermNormalization::Raw).unwrap()
    }

    #[test]
    fn full_window_reproduces_the_instance_exactly() {
        let ham = chain_family(6);
        let x = ham.sample_instance(3);
        let d = lattice_diameter(&ham);
        assert_eq!(d, 5);
        let rows = locality_curve(&ham, (2, 3), &x, &[d]).unwrap();
        assert_eq!(rows[0].kept, ham.num_params());
        assert_eq!(rows[0].err, 0.0, "diameter window must keep every coupling");
    }

    #[test]
    fn zero_window_generically_misses() {
        let ham = chain_family(6);
        let x = ham.sample_instance(8);
        let rows = locality_curve(&ham, (2, 3), &x, &[0, 5]).unwrap();
        assert!(rows[0].kept < ham.num_params());
        assert!(rows[0].err > 1e-6, "restriction should move the correlation, got {}", rows[0].err);
        assert!(rows[1].err == 0.0);
    }

    #[test]
    fn restriction_preserves_kept_couplings() {
        let x = vec![0.3, 1.7, 0.9];
        let r = restricted_couplings(&x, &[1]);
        assert_eq!(r, vec![NEUTRAL_COUPLING, 1.7, NEUTRAL_COUPLING]);
    }
}
