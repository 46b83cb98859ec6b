//! Parameterized Hamiltonian families and exact ground states.
//!
//! A family is a sum of local terms, each reading its own slice of the
//! parameter vector linearly: `H(x) = sum_j sum_k x_{jk} G_{jk}` with the
//! `G_{jk}` fixed Pauli sums on the term's sites. The shipped family is the
//! random-coupling antiferromagnetic Heisenberg model with one coupling per
//! nearest-neighbor edge, couplings drawn uniformly from [0, 2].
//!
//! Ground states are represented factorized: the nonzero-coupling
//! interaction graph is split into connected components, each component is
//! solved exactly, and sites touched by no active term contribute maximally
//! mixed factors. Degenerate ground spaces are kept as uniform mixtures over
//! the full multiplet, so expectation values are exact even when couplings
//! are zeroed out (which the locality probe does aggressively).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{GeoRange, Lattice, PauliOp, PauliString};
use crate::pauli::{checked_dim, AssembledOperator, PauliSum, StringMasks};
use crate::scalar::{fp, Scalar};
use crate::solver;

/// Relative degeneracy threshold: eigenvalues within this (times
/// `max(1, |E0|)`) of the bottom count as ground states.
pub const DEGENERACY_REL_TOL: f64 = 1e-10;

/// How couplings enter the Heisenberg terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermNormalization {
    /// `J * (XX + YY + ZZ)` — the convention of the numerical experiments.
    Raw,
    /// `J * (XX + YY + ZZ) / 3`, so each term has operator norm at most
    /// its coupling.
    InfNormOne,
}

/// One local term: a linear map from a parameter slice to a Pauli sum.
#[derive(Debug, Clone)]
pub struct Term<F: Scalar> {
    sites: Vec<usize>,
    params: Range<usize>,
    generators: Vec<PauliSum<F>>,
}

impl<F: Scalar> Term<F> {
    /// Build a term; `generators` must have one entry per parameter in the
    /// slice, each supported inside `sites`.
    pub fn new(
        mut sites: Vec<usize>,
        params: Range<usize>,
        generators: Vec<PauliSum<F>>,
    ) -> Result<Self> {
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::arg("term needs at least one site"));
        }
        if generators.len() != params.len() {
            return Err(Error::arg(format!(
                "term has {} parameters but {} generators",
                params.len(),
                generators.len()
            )));
        }
        for g in &generators {
            if g.has_identity() {
                return Err(Error::arg("term generators must be traceless"));
            }
            for s in g.support_sites() {
                if !sites.contains(&s) {
                    return Err(Error::arg(format!(
                        "generator touches site {s} outside the term's sites"
                    )));
                }
            }
        }
        Ok(Term { sites, params, generators })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Global indices of the parameters this term reads.
    pub fn params(&self) -> Range<usize> {
        self.params.clone()
    }

    /// Substitute the term's parameter slice of `x` into its generators.
    pub fn substitute(&self, x: &[F]) -> PauliSum<F> {
        let mut sum = PauliSum::zero();
        for (k, g) in self.generators.iter().enumerate() {
            sum.add_scaled(g, x[self.params.start + k]);
        }
        sum
    }
}

/// A parameterized geometrically local Hamiltonian family on a lattice.
#[derive(Debug, Clone)]
pub struct ParamHamiltonian<F: Scalar> {
    lattice: Lattice,
    range: GeoRange,
    terms: Vec<Term<F>>,
    num_params: usize,
    normalization: TermNormalization,
    family: String,
}

impl<F: Scalar> ParamHamiltonian<F> {
    /// Assemble a family from explicit terms. The parameter slices must
    /// partition `0..m` in order.
    pub fn new(
        lattice: Lattice,
        range: GeoRange,
        terms: Vec<Term<F>>,
        family: impl Into<String>,
        normalization: TermNormalization,
    ) -> Result<Self> {
        if range.dims() != lattice.dims() {
            return Err(Error::arg("range dimension does not match lattice"));
        }
        let n = lattice.num_sites();
        let mut next = 0usize;
        for t in &terms {
            if t.params.start != next {
                return Err(Error::arg(
                    "term parameter slices must partition the parameter vector in order",
                ));
            }
            next = t.params.end;
            if t.sites.iter().any(|&s| s >= n) {
                return Err(Error::arg("term site outside the lattice"));
            }
        }
        Ok(ParamHamiltonian {
            lattice,
            range,
            terms,
            num_params: next,
            normalization,
            family: family.into(),
        })
    }

    /// Random-coupling Heisenberg family: one coupling per nearest-neighbor
    /// edge, edges in lattice order. Lattices of dimension 1 or 2 only.
    pub fn heisenberg(lattice: &Lattice, normalization: TermNormalization) -> Result<Self> {
        if lattice.dims() > 2 {
            return Err(Error::arg("Heisenberg family is defined on 1D and 2D lattices"));
        }
        let scale = match normalization {
            TermNormalization::Raw => F::one(),
            TermNormalization::InfNormOne => F::one() / fp::<F>(3.0),
        };
        let edges = lattice.edges();
        let mut terms = Vec::with_capacity(edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            let mut gen = PauliSum::zero();
            for op in PauliOp::ALL {
                gen.add_term(PauliString::new(vec![(i, op), (j, op)])?, scale);
            }
            terms.push(Term::new(vec![i, j], e..e + 1, vec![gen])?);
        }
        let range = GeoRange::uniform(lattice.dims(), 2)?;
        ParamHamiltonian::new(lattice.clone(), range, terms, "heisenberg", normalization)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn range(&self) -> &GeoRange {
        &self.range
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    /// Length of the parameter vector.
    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn terms(&self) -> &[Term<F>] {
        &self.terms
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn normalization(&self) -> TermNormalization {
        self.normalization
    }

    /// Uniform couplings in [0, 2), deterministic in the seed.
    pub fn sample_instance(&self, seed: u64) -> Vec<F> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..self.num_params)
            .map(|_| fp::<F>(2.0 * rng.gen::<f64>()))
            .collect()
    }

    fn check_params(&self, x: &[F]) -> Result<()> {
        if x.len() != self.num_params {
            return Err(Error::arg(format!(
                "expected {} parameters, got {}",
                self.num_params,
                x.len()
            )));
        }
        Ok(())
    }

    /// Total Pauli sum at parameter vector `x`.
    pub fn coupling_sum(&self, x: &[F]) -> Result<PauliSum<F>> {
        self.check_params(x)?;
        let mut sum = PauliSum::zero();
        for t in &self.terms {
            sum.add_scaled(&t.substitute(x), F::one());
        }
        Ok(sum)
    }

    /// Matrix-free operator at `x` (capacity-capped at 20 sites).
    pub fn assemble(&self, x: &[F]) -> Result<AssembledOperator<F>> {
        Ok(AssembledOperator::new(&self.coupling_sum(x)?, self.num_sites())?)
    }

    /// Exact ground state at `x` as a uniform mixture over the ground space.
    pub fn ground_state(&self, x: &[F]) -> Result<GroundState<F>> {
        self.check_params(x)?;
        let n = self.num_sites();
        if n > AssembledOperator::<F>::MAX_SITES {
            return Err(Error::capacity(format!(
                "{n} sites exceeds the {}-site ground-state cap",
                AssembledOperator::<F>::MAX_SITES
            )));
        }
        // connected components of the active interaction graph
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            let mut root = i;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = i;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        let mut active_sums: Vec<PauliSum<F>> = Vec::new();
        let mut touched = vec![false; n];
        for t in &self.terms {
            let sub = t.substitute(x);
            if sub.is_empty() {
                continue;
            }
            for &s in &t.sites {
                touched[s] = true;
            }
            for w in t.sites.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
            active_sums.push(sub);
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for s in 0..n {
            if touched[s] {
                let root = find(&mut parent, s);
                groups.entry(root).or_default().push(s);
            }
        }
        let free_sites: Vec<usize> = (0..n).filter(|&s| !touched[s]).collect();

        // gather each component's Pauli sum in local site coordinates
        let mut site_component = vec![usize::MAX; n];
        let component_sites: Vec<Vec<usize>> = groups.into_values().collect();
        for (ci, sites) in component_sites.iter().enumerate() {
            for &s in sites {
                site_component[s] = ci;
            }
        }
        let mut local_sums: Vec<PauliSum<F>> =
            vec![PauliSum::zero(); component_sites.len()];
        for sub in &active_sums {
            let Some(any_site) = sub.max_site() else { continue };
            let ci = site_component[any_site];
            let sites = &component_sites[ci];
            for (p, &a) in sub.terms() {
                let local: Vec<(usize, PauliOp)> = p
                    .ops()
                    .iter()
                    .map(|&(s, op)| {
                        (sites.binary_search(&s).expect("site in component"), op)
                    })
                    .collect();
                local_sums[ci].add_term(PauliString::new(local)?, a);
            }
        }

        let rel_tol = fp::<F>(DEGENERACY_REL_TOL);
        let mut components = Vec::with_capacity(component_sites.len());
        let mut energy = F::zero();
        let mut gap: Option<F> = None;
        let mut multiplicity: u64 = 1;
        let mut residual = F::zero();
        for (sites, local) in component_sites.into_iter().zip(local_sums) {
            let op = AssembledOperator::new(&local, sites.len())?;
            let space = solver::ground_space(&op, rel_tol)?;
            energy += space.energy;
            gap = Some(match gap {
                None => space.gap,
                Some(g) => g.min(space.gap),
            });
            multiplicity = multiplicity.saturating_mul(space.basis.len() as u64);
            residual = residual.max(space.residual);
            components.push(SolvedComponent {
                sites,
                basis: space.basis,
            });
        }
        if !free_sites.is_empty() {
            // a free spin contributes two degenerate levels at energy zero
            gap = Some(F::zero());
            for _ in &free_sites {
                multiplicity = multiplicity.saturating_mul(2);
            }
        }
        let gap = gap.unwrap_or(F::zero());
        Ok(GroundState {
            n,
            energy,
            gap,
            multiplicity,
            residual,
            components,
            free_sites,
        })
    }

    /// Energy gap `E_1 - E_0` at `x` (16-site cap).
    pub fn spectral_gap(&self, x: &[F]) -> Result<F> {
        if self.num_sites() > 16 {
            return Err(Error::capacity("gap evaluation capped at 16 sites"));
        }
        Ok(self.ground_state(x)?.gap())
    }
}

/// Normalized two-site correlation observable `(XX + YY + ZZ) / 3`.
pub fn correlation_observable<F: Scalar>(i: usize, j: usize) -> Result<PauliSum<F>> {
    if i == j {
        return Err(Error::arg("correlation observable needs two distinct sites"));
    }
    let third = F::one() / fp::<F>(3.0);
    let mut sum = PauliSum::zero();
    for op in PauliOp::ALL {
        sum.add_term(PauliString::new(vec![(i, op), (j, op)])?, third);
    }
    Ok(sum)
}

/// One solved connected component of an instance.
#[derive(Debug, Clone)]
pub struct SolvedComponent<F: Scalar> {
    pub(crate) sites: Vec<usize>,
    /// Orthonormal basis of the component's ground space (local site order).
    pub(crate) basis: Vec<DVector<Complex<F>>>,
}

/// Exact ground state of one instance, stored factorized by component.
///
/// The represented density matrix is the tensor product of per-component
/// uniform mixtures over their ground multiplets, with maximally mixed
/// factors on sites untouched by any active term.
#[derive(Debug, Clone)]
pub struct GroundState<F: Scalar> {
    n: usize,
    energy: F,
    gap: F,
    multiplicity: u64,
    residual: F,
    components: Vec<SolvedComponent<F>>,
    free_sites: Vec<usize>,
}

impl<F: Scalar> GroundState<F> {
    pub fn num_sites(&self) -> usize {
        self.n
    }

    /// Ground energy `E_0`.
    pub fn energy(&self) -> F {
        self.energy
    }

    /// `E_1 - E_0` counting multiplicity (zero when degenerate).
    pub fn gap(&self) -> F {
        self.gap
    }

    /// Dimension of the ground space.
    pub fn multiplicity(&self) -> u64 {
        self.multiplicity
    }

    pub fn is_degenerate(&self) -> bool {
        self.multiplicity > 1
    }

    /// Worst eigen-residual over the solved component bases.
    pub fn residual(&self) -> F {
        self.residual
    }

    pub(crate) fn components(&self) -> &[SolvedComponent<F>] {
        &self.components
    }

    pub(crate) fn free_sites(&self) -> &[usize] {
        &self.free_sites
    }

    /// Expectation of a single Pauli string in the mixture.
    ///
    /// Factorizes over components: any non-identity letter on a free site
    /// gives zero, and each component contributes the multiplet average of
    /// its restriction.
    pub fn expectation_string(&self, p: &PauliString) -> Result<F> {
        for s in p.support() {
            if s >= self.n {
                return Err(Error::arg(format!(
                    "string touches site {s} outside the {}-site system",
                    self.n
                )));
            }
        }
        if p.is_identity() {
            return Ok(F::one());
        }
        // split the string's letters by component; free sites kill the trace
        let mut per_component: Vec<Vec<(usize, PauliOp)>> =
            vec![Vec::new(); self.components.len()];
        for &(site, op) in p.ops() {
            if self.free_sites.binary_search(&site).is_ok() {
                return Ok(F::zero());
            }
            let ci = self
                .components
                .iter()
                .position(|c| c.sites.binary_search(&site).is_ok())
                .expect("site in some component");
            let local = self.components[ci].sites.binary_search(&site).unwrap();
            per_component[ci].push((local, op));
        }
        let mut value = F::one();
        for (c, local_ops) in self.components.iter().zip(per_component) {
            if local_ops.is_empty() {
                continue;
            }
            let local = PauliString::new(local_ops)?;
            let masks = StringMasks::new(&local, c.sites.len())?;
            let g = fp::<F>(c.basis.len() as f64);
            let mut avg = F::zero();
            for b in &c.basis {
                avg += masks.expectation(b.as_slice());
            }
            value *= avg / g;
            if value == F::zero() {
                break;
            }
        }
        Ok(value)
    }

    /// Expectation of a Pauli sum (identity components contribute their
    /// coefficient).
    pub fn expectation(&self, o: &PauliSum<F>) -> Result<F> {
        let mut acc = F::zero();
        for (p, &a) in o.terms() {
            acc += a * self.expectation_string(p)?;
        }
        Ok(acc)
    }

    /// The unique ground vector in the full 2^n space.
    ///
    /// Errors when the ground space is degenerate.
    pub fn state_vector(&self) -> Result<DVector<Complex<F>>> {
        if self.multiplicity != 1 {
            return Err(Error::arg(
                "ground space is degenerate; no single state vector exists",
            ));
        }
        let dim = checked_dim(self.n)?;
        let mut out = DVector::from_element(dim, Complex::new(F::one(), F::zero()));
        for b in 0..dim {
            let mut amp = Complex::new(F::one(), F::zero());
            for c in &self.components {
                let mut local = 0usize;
                for (pos, &site) in c.sites.iter().enumerate() {
                    if b >> site & 1 == 1 {
                        local |= 1 << pos;
                    }
                }
                amp *= c.basis[0][local];
            }
            out[b] = amp;
        }
        Ok(out)
    }

    /// Dense density matrix of the mixture (10-site cap).
    pub fn density_matrix(&self) -> Result<DMatrix<Complex<F>>> {
        if self.n > 10 {
            return Err(Error::capacity("dense density matrix capped at 10 sites"));
        }
        let dim = 1usize << self.n;
        // per-component dense mixtures
        let mut factors: Vec<(Vec<usize>, DMatrix<Complex<F>>)> = Vec::new();
        for c in &self.components {
            let cdim = 1usize << c.sites.len();
            let g = Complex::new(fp::<F>(c.basis.len() as f64), F::zero());
            let mut rho = DMatrix::zeros(cdim, cdim);
            for b in &c.basis {
                rho += b * b.adjoint();
            }
            rho /= g;
            factors.push((c.sites.clone(), rho));
        }
        let half = Complex::new(fp::<F>(0.5), F::zero());
        let mut out = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            for col in 0..dim {
                let mut amp = Complex::new(F::one(), F::zero());
                for (sites, rho) in &factors {
                    let (mut lr, mut lc) = (0usize, 0usize);
                    for (pos, &site) in sites.iter().enumerate() {
                        if row >> site & 1 == 1 {
                            lr |= 1 << pos;
                        }
                        if col >> site & 1 == 1 {
                            lc |= 1 << pos;
                        }
                    }
                    amp *= rho[(lr, lc)];
                }
                for &f in &self.free_sites {
                    if (row >> f & 1) != (col >> f & 1) {
                        amp = Complex::new(F::zero(), F::zero());
                        break;
                    }
                    amp *= half;
                }
                out[(row, col)] = amp;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_site_singlet_and_gap() {
        let lat = Lattice::chain(2).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let gs = ham.ground_state(&[1.0]).unwrap();
        assert_relative_eq!(gs.energy(), -3.0, epsilon = 1e-9);
        assert_relative_eq!(gs.gap(), 4.0, epsilon = 1e-9);
        assert!(!gs.is_degenerate());
        // singlet correlation: <C_01> = -1
        let c = correlation_observable::<f64>(0, 1).unwrap();
        assert_relative_eq!(gs.expectation(&c).unwrap(), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn normalized_terms_shrink_by_three() {
        let lat = Lattice::chain(2).unwrap();
        let raw = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let norm =
            ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::InfNormOne).unwrap();
        let e_raw = raw.ground_state(&[1.0]).unwrap().energy();
        let e_norm = norm.ground_state(&[1.0]).unwrap().energy();
        assert_relative_eq!(e_raw, 3.0 * e_norm, epsilon = 1e-9);
    }

    #[test]
    fn zero_couplings_give_maximally_mixed() {
        let lat = Lattice::chain(4).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let gs = ham.ground_state(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(gs.multiplicity(), 16);
        assert_relative_eq!(gs.energy(), 0.0);
        assert_relative_eq!(gs.gap(), 0.0);
        for p in [
            PauliString::single(0, PauliOp::Z),
            PauliString::new(vec![(1, PauliOp::X), (2, PauliOp::X)]).unwrap(),
        ] {
            assert_relative_eq!(gs.expectation_string(&p).unwrap(), 0.0);
        }
        let rho = gs.density_matrix().unwrap();
        for i in 0..16 {
            assert_relative_eq!(rho[(i, i)].re, 1.0 / 16.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn decoupled_chain_factorizes() {
        // couplings (1, 0, 1) on a 4-chain: two independent singlets
        let lat = Lattice::chain(4).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let gs = ham.ground_state(&[1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(gs.energy(), -6.0, epsilon = 1e-9);
        assert_eq!(gs.multiplicity(), 1);
        let c01 = correlation_observable::<f64>(0, 1).unwrap();
        let c12 = correlation_observable::<f64>(1, 2).unwrap();
        assert_relative_eq!(gs.expectation(&c01).unwrap(), -1.0, epsilon = 1e-9);
        // sites 1 and 2 live in different singlets: product of zero means
        assert_relative_eq!(gs.expectation(&c12).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_meets_tolerance_against_dense_norm() {
        let lat = Lattice::new(vec![2, 2]).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let x = ham.sample_instance(41);
        let gs = ham.ground_state(&x).unwrap();
        let (lo, hi) = crate::solver::spectral_bounds(&ham.assemble(&x).unwrap()).unwrap();
        let norm = lo.abs().max(hi.abs());
        assert!(gs.residual() <= 1e-8 * norm, "residual {}", gs.residual());
    }

    #[test]
    fn ground_energy_matches_assembled_expectation() {
        let lat = Lattice::chain(5).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let x = ham.sample_instance(7);
        let gs = ham.ground_state(&x).unwrap();
        let sum = ham.coupling_sum(&x).unwrap();
        assert_relative_eq!(gs.expectation(&sum).unwrap(), gs.energy(), epsilon = 1e-8);
    }

    #[test]
    fn sample_instance_is_deterministic_and_in_range() {
        let lat = Lattice::new(vec![2, 3]).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let a = ham.sample_instance(9);
        let b = ham.sample_instance(9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert!(a.iter().all(|&v| (0.0..2.0).contains(&v)));
    }

    #[test]
    fn coupling_mean_approaches_one() {
        let lat = Lattice::chain(4).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let mut mean = [0.0; 3];
        let samples = 10_000;
        for seed in 0..samples {
            let x = ham.sample_instance(seed);
            for (m, v) in mean.iter_mut().zip(&x) {
                *m += v;
            }
        }
        for m in mean {
            assert!((m / samples as f64 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn transposed_lattice_same_spectrum() {
        let a = Lattice::new(vec![2, 3]).unwrap();
        let b = Lattice::new(vec![3, 2]).unwrap();
        let ham_a = ParamHamiltonian::<f64>::heisenberg(&a, TermNormalization::Raw).unwrap();
        let ham_b = ParamHamiltonian::<f64>::heisenberg(&b, TermNormalization::Raw).unwrap();
        let xa = ham_a.sample_instance(3);
        // transpose site map: (r, c) in a -> (c, r) in b; remap edge couplings
        let map = |s: usize| {
            let c = a.site_coords(s);
            b.site_index(&[c[1], c[0]])
        };
        let edges_a = a.edges();
        let edges_b = b.edges();
        let mut xb = vec![0.0; xa.len()];
        for (e, &(i, j)) in edges_a.iter().enumerate() {
            let (mut p, mut q) = (map(i), map(j));
            if p > q {
                std::mem::swap(&mut p, &mut q);
            }
            let pos = edges_b.iter().position(|&t| t == (p, q)).unwrap();
            xb[pos] = xa[e];
        }
        let ea = ham_a.ground_state(&xa).unwrap().energy();
        let eb = ham_b.ground_state(&xb).unwrap().energy();
        assert_relative_eq!(ea, eb, epsilon = 1e-9);
    }

    #[test]
    fn state_vector_matches_density_matrix() {
        let lat = Lattice::chain(3).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        let x = vec![1.0, 0.7];
        let gs = ham.ground_state(&x).unwrap();
        if gs.multiplicity() == 1 {
            let psi = gs.state_vector().unwrap();
            let rho = gs.density_matrix().unwrap();
            let outer = &psi * psi.adjoint();
            assert!((rho - outer).norm() < 1e-9);
        } else {
            // odd chains are doublets; the mixture has trace one
            let rho = gs.density_matrix().unwrap();
            let tr: f64 = (0..8).map(|i| rho[(i, i)].re).sum();
            assert_relative_eq!(tr, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn param_length_checked() {
        let lat = Lattice::chain(3).unwrap();
        let ham = ParamHamiltonian::<f64>::heisenberg(&lat, TermNormalization::Raw).unwrap();
        assert!(ham.ground_state(&[1.0]).is_err());
        assert!(ham.assemble(&[1.0, 1.0, 1.0]).is_err());
    }
}
