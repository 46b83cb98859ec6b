//! Certifying an upper bound on the Pauli coefficient 1-norm of a
//! geometrically local observable in terms of its operator norm.
//!
//! The construction is fully explicit. Sites are partitioned, per offset
//! vector, into d-dimensional blocks of `R_k` consecutive sites per axis
//! separated by equally wide buffers; every string whose per-axis extent is
//! below `R_k` lands entirely inside a block for at least one offset.
//! Assigning each string to its first fitting offset, picking the offset
//! carrying the most coefficient weight, and preparing a product test state
//! whose block factors align with the assigned strings' signs yields
//!
//! ```text
//! Σ_P |α_P|  ≤  (Π_k 2 R_k) · 4^(Π_k R_k) · ||O||_∞
//! ```
//!
//! with every intermediate quantity (per-offset weight, test-state trace,
//! operator norm) computable and cross-checkable, which is what
//! [`verify_norm_inequality`] reports.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{GeoRange, Lattice, PauliString};
use crate::pauli::{AssembledOperator, PauliSum};
use crate::scalar::{fp, Scalar};

pub use crate::pauli::decompose_on_sites;

/// Largest system for which dense test-state cross-checks are attempted.
pub const MAX_DENSE_STATE_SITES: usize = 10;

/// One block of a [`BlockPartition`]: an axis-aligned box of sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Per-axis index of the block within its offset's grid.
    pub coords: Vec<usize>,
    /// Per-axis first site coordinate.
    pub start: Vec<usize>,
    /// Global site indices inside the block, ascending.
    pub sites: Vec<usize>,
}

/// The blocks and buffer induced by one offset vector.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    offset: Vec<usize>,
    blocks: Vec<Block>,
    buffer: Vec<usize>,
}

impl BlockPartition {
    /// Blocks of `range.per_axis()[k]` consecutive sites per axis, the
    /// first one starting at `offset[k]`, consecutive ones `2·R_k` apart;
    /// only complete blocks count and everything else is buffer.
    pub fn build(lattice: &Lattice, range: &GeoRange, offset: &[usize]) -> Result<Self> {
        let d = lattice.dims();
        if offset.len() != d || range.per_axis().len() != d {
            return Err(Error::arg(format!(
                "offset and range must have {d} axes"
            )));
        }
        for (k, (&j, &r)) in offset.iter().zip(range.per_axis()).enumerate() {
            if r == 0 {
                return Err(Error::arg("block width must be at least 1 per axis"));
            }
            if j >= 2 * r {
                return Err(Error::arg(format!(
                    "offset {j} on axis {k} must be below 2·{r}"
                )));
            }
        }
        // per-axis block start coordinates
        let mut axis_starts: Vec<Vec<usize>> = Vec::with_capacity(d);
        for k in 0..d {
            let r = range.per_axis()[k];
            let n = lattice.sides()[k];
            let mut starts = Vec::new();
            let mut s = offset[k];
            while s + r <= n {
                starts.push(s);
                s += 2 * r;
            }
            axis_starts.push(starts);
        }
        // cartesian product of the per-axis blocks
        let mut blocks = Vec::new();
        let mut coords = vec![0usize; d];
        'outer: loop {
            if axis_starts.iter().all(|s| !s.is_empty()) {
                let start: Vec<usize> = (0..d).map(|k| axis_starts[k][coords[k]]).collect();
                let mut sites = Vec::new();
                for site in 0..lattice.num_sites() {
                    let c = lattice.site_coords(site);
                    let inside = (0..d)
                        .all(|k| c[k] >= start[k] && c[k] < start[k] + range.per_axis()[k]);
                    if inside {
                        sites.push(site);
                    }
                }
                blocks.push(Block {
                    coords: coords.clone(),
                    start,
                    sites,
                });
            } else {
                break;
            }
            // odometer over block coordinates, last axis fastest
            for k in (0..d).rev() {
                coords[k] += 1;
                if coords[k] < axis_starts[k].len() {
                    continue 'outer;
                }
                coords[k] = 0;
            }
            break;
        }
        let mut in_block = vec![false; lattice.num_sites()];
        for b in &blocks {
            for &s in &b.sites {
                in_block[s] = true;
            }
        }
        let buffer = (0..lattice.num_sites()).filter(|&s| !in_block[s]).collect();
        Ok(BlockPartition {
            offset: offset.to_vec(),
            blocks,
            buffer,
        })
    }

    pub fn offset(&self) -> &[usize] {
        &self.offset
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Sites belonging to no block.
    pub fn buffer(&self) -> &[usize] {
        &self.buffer
    }
}

/// Where one string lands: the first offset (lexicographically) whose block
/// grid contains it, and the block's per-axis index there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringAssignment {
    pub offset: Vec<usize>,
    /// Lexicographic rank of `offset` (first axis most significant).
    pub offset_index: u64,
    /// Per-axis block index within the offset's grid.
    pub block: Vec<usize>,
}

/// Number of distinct offsets: `Π_k 2·R_k`.
pub fn num_offsets(range: &GeoRange) -> u64 {
    range.per_axis().iter().map(|&r| 2 * r as u64).product()
}

/// Assign each string to its lexicographically first fitting offset.
///
/// Fails if any string is the identity or has a per-axis extent of `R_k` or
/// more: such strings cannot fit a block of `R_k` consecutive sites, and
/// callers should widen the range (see [`fitting_range`]).
pub fn assign_strings(
    lattice: &Lattice,
    range: &GeoRange,
    strings: &[PauliString],
) -> Result<Vec<StringAssignment>> {
    let d = lattice.dims();
    let mut out = Vec::with_capacity(strings.len());
    for p in strings {
        if p.is_identity() {
            return Err(Error::arg("identity string cannot be assigned to a block"));
        }
        let mut lo = vec![usize::MAX; d];
        let mut hi = vec![0usize; d];
        for s in p.support() {
            let c = lattice.site_coords(s);
            for k in 0..d {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let mut offset = Vec::with_capacity(d);
        let mut block = Vec::with_capacity(d);
        for k in 0..d {
            let r = range.per_axis()[k];
            let n = lattice.sides()[k];
            if hi[k] - lo[k] + 1 > r {
                return Err(Error::arg(format!(
                    "string {p} spans {} sites on axis {k}, more than the block width {r}; \
                     widen the range to at least the extent plus one",
                    hi[k] - lo[k] + 1
                )));
            }
            // candidate block starts containing the support window
            let s_min = (hi[k] + 1).saturating_sub(r);
            let s_max = lo[k].min(n.saturating_sub(r));
            let mut best: Option<(usize, usize)> = None; // (offset j, block index)
            for s in s_min..=s_max {
                let j = s % (2 * r);
                if s >= j {
                    let i = (s - j) / (2 * r);
                    if best.is_none_or(|(bj, _)| j < bj) {
                        best = Some((j, i));
                    }
                }
            }
            let (j, i) = best.ok_or_else(|| {
                Error::arg(format!(
                    "no complete block of width {r} fits the lattice side {n} around {p}"
                ))
            })?;
            offset.push(j);
            block.push(i);
        }
        let mut offset_index = 0u64;
        for k in 0..d {
            offset_index = offset_index * (2 * range.per_axis()[k] as u64) + offset[k] as u64;
        }
        out.push(StringAssignment {
            offset,
            offset_index,
            block,
        });
    }
    Ok(out)
}

/// Smallest range whose blocks can hold every given string: per axis, the
/// largest extent plus one.
pub fn fitting_range(lattice: &Lattice, strings: &[PauliString]) -> Result<GeoRange> {
    if strings.is_empty() {
        return Err(Error::arg("cannot derive a range from no strings"));
    }
    let d = lattice.dims();
    let mut per_axis = vec![1usize; d];
    for p in strings {
        for (k, e) in p.extent_per_axis(lattice).iter().enumerate() {
            per_axis[k] = per_axis[k].max(e + 1);
        }
    }
    GeoRange::new(per_axis)
}

/// A product state whose block factors align with given signed strings.
///
/// Each block holds `(1/2^|b|)·(I + (1/|S_b|)·Σ_Q s_Q·Q)` over its assigned
/// strings `Q` with signs `s_Q = ±1`; buffer sites are maximally mixed.
/// Expectations factor over blocks: an assigned string `Q` has expectation
/// `s_Q/|S_b|`, any string leaking into the buffer or not matching the
/// block contents has expectation zero.
#[derive(Debug, Clone)]
pub struct TestState<F: Scalar> {
    num_sites: usize,
    partition: BlockPartition,
    /// Signed strings per block, indexed like `partition.blocks()`.
    block_strings: Vec<Vec<(PauliString, F)>>,
}

impl<F: Scalar> TestState<F> {
    /// Build the state for one offset from `(string, sign)` pairs.
    ///
    /// Every string must lie entirely inside one block of the partition.
    pub fn build(
        lattice: &Lattice,
        range: &GeoRange,
        offset: &[usize],
        signed: &[(PauliString, F)],
    ) -> Result<Self> {
        let partition = BlockPartition::build(lattice, range, offset)?;
        let mut block_strings: Vec<Vec<(PauliString, F)>> =
            vec![Vec::new(); partition.blocks.len()];
        for (p, sign) in signed {
            if sign.abs() != F::one() {
                return Err(Error::arg("string signs must be ±1"));
            }
            let home = partition.blocks.iter().position(|b| {
                p.support().all(|s| b.sites.binary_search(&s).is_ok())
            });
            let Some(b) = home else {
                return Err(Error::arg(format!(
                    "string {p} does not fit any block at offset {offset:?}"
                )));
            };
            if block_strings[b].iter().any(|(q, _)| q == p) {
                return Err(Error::arg(format!("string {p} listed twice")));
            }
            block_strings[b].push((p.clone(), *sign));
        }
        Ok(TestState {
            num_sites: lattice.num_sites(),
            partition,
            block_strings,
        })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Exact expectation of a string in the product state.
    pub fn expectation(&self, p: &PauliString) -> F {
        if p.is_identity() {
            return F::one();
        }
        // a support site in the buffer kills the trace
        for s in p.support() {
            if self.partition.buffer.binary_search(&s).is_ok() {
                return F::zero();
            }
        }
        // product of per-block traces of the restrictions
        let mut value = F::one();
        for (block, strings) in self.partition.blocks.iter().zip(&self.block_strings) {
            let restriction: Vec<_> = p
                .ops()
                .iter()
                .filter(|&&(s, _)| block.sites.binary_search(&s).is_ok())
                .copied()
                .collect();
            if restriction.is_empty() {
                continue;
            }
            let restricted = PauliString::new(restriction).expect("sorted sublist");
            match strings.iter().find(|(q, _)| *q == restricted) {
                Some((_, sign)) => {
                    value *= *sign / fp::<F>(strings.len() as f64);
                }
                None => return F::zero(),
            }
        }
        value
    }

    /// Expectation of a whole observable.
    pub fn expectation_sum(&self, o: &PauliSum<F>) -> F {
        let mut acc = F::zero();
        for (p, &a) in o.terms() {
            acc += a * self.expectation(p);
        }
        acc
    }

    /// Dense density matrix (for cross-checks; at most
    /// [`MAX_DENSE_STATE_SITES`] sites).
    pub fn density_matrix(&self) -> Result<DMatrix<Complex<F>>> {
        if self.num_sites > MAX_DENSE_STATE_SITES {
            return Err(Error::capacity(format!(
                "dense test state limited to {MAX_DENSE_STATE_SITES} sites, got {}",
                self.num_sites
            )));
        }
        let dim = 1usize << self.num_sites;
        let norm = fp::<F>(1.0 / dim as f64);
        let mut rho = DMatrix::<Complex<F>>::identity(dim, dim) * Complex::new(norm, F::zero());
        // blocks commute (disjoint supports), so factor order is irrelevant
        for strings in &self.block_strings {
            if strings.is_empty() {
                continue;
            }
            let mut sum = PauliSum::<F>::zero();
            let weight = F::one() / fp::<F>(strings.len() as f64);
            for (q, sign) in strings {
                sum.add_term(q.clone(), *sign * weight);
            }
            let factor = DMatrix::<Complex<F>>::identity(dim, dim) + sum.dense(self.num_sites)?;
            rho = &rho * &factor;
        }
        Ok(rho)
    }
}

/// Operator norm (largest absolute eigenvalue) of an observable on
/// `num_sites` qubits.
pub fn operator_norm<F: Scalar>(o: &PauliSum<F>, num_sites: usize) -> Result<F> {
    let op = AssembledOperator::new(o, num_sites)?;
    let (lo, hi) = crate::solver::spectral_bounds(&op)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Everything the 1-norm certificate measured, plus the verdict.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct NormCertificate<F: Scalar> {
    /// Pauli coefficient 1-norm being bounded.
    pub sum_abs_coeff: F,
    /// Number of offsets the strings were distributed over.
    pub num_offsets: u64,
    /// Offset carrying the most coefficient weight.
    pub offset: Vec<usize>,
    /// Coefficient weight at that offset.
    pub sum_at_offset: F,
    /// Exact test-state expectation of the observable.
    pub trace_analytic: F,
    /// Dense cross-check of the same trace (small systems only).
    pub trace_dense: Option<F>,
    /// Operator norm of the observable.
    pub spectral_norm: F,
    /// Largest number of strings sharing one block at the chosen offset.
    pub max_block_population: usize,
    /// `(Π_k 2·R_k) · 4^(Π_k R_k)`.
    pub bound_constant: F,
    /// Whether the full inequality (and its intermediate steps) held.
    pub pass: bool,
}

/// Run the constructive certificate for `o` on `lattice` with block range
/// `range` and check `Σ|α| ≤ (Π 2R_k)·4^(Π R_k)·||O||`.
///
/// The observable must be non-empty, identity-free, and every string's
/// per-axis extent must be below `R_k`.
pub fn verify_norm_inequality<F: Scalar>(
    o: &PauliSum<F>,
    lattice: &Lattice,
    range: &GeoRange,
) -> Result<NormCertificate<F>> {
    if o.is_empty() {
        return Err(Error::arg("cannot certify an empty observable"));
    }
    if o.has_identity() {
        return Err(Error::arg(
            "observable must be traceless: remove the identity component first",
        ));
    }
    if let Some(max) = o.max_site() {
        if max >= lattice.num_sites() {
            return Err(Error::arg(format!(
                "observable touches site {max} outside the {}-site lattice",
                lattice.num_sites()
            )));
        }
    }
    let strings: Vec<PauliString> = o.terms().map(|(p, _)| p.clone()).collect();
    let coeffs: Vec<F> = o.terms().map(|(_, &a)| a).collect();
    let assignments = assign_strings(lattice, range, &strings)?;

    // weight per offset; the winner maximizes it (ties: smallest index)
    let mut weight_by_offset: BTreeMap<u64, F> = BTreeMap::new();
    for (asg, &a) in assignments.iter().zip(&coeffs) {
        *weight_by_offset.entry(asg.offset_index).or_insert(F::zero()) += a.abs();
    }
    let (&star_index, &sum_at_offset) = weight_by_offset
        .iter()
        .max_by(|a, b| {
            a.1.partial_cmp(b.1)
                .expect("finite weights")
                .then(b.0.cmp(a.0))
        })
        .expect("at least one string");
    let star_offset = assignments
        .iter()
        .find(|a| a.offset_index == star_index)
        .expect("index came from the assignments")
        .offset
        .clone();

    let signed: Vec<(PauliString, F)> = assignments
        .iter()
        .zip(&strings)
        .zip(&coeffs)
        .filter(|((asg, _), _)| asg.offset_index == star_index)
        .map(|((_, p), &a)| {
            let sign = if a >= F::zero() { F::one() } else { -F::one() };
            (p.clone(), sign)
        })
        .collect();
    let state = TestState::build(lattice, range, &star_offset, &signed)?;
    let trace_analytic = state.expectation_sum(o);
    let trace_dense = if lattice.num_sites() <= MAX_DENSE_STATE_SITES {
        let rho = state.density_matrix()?;
        let dense_o = o.dense(lattice.num_sites())?;
        let product = &dense_o * &rho;
        let mut tr = Complex::new(F::zero(), F::zero());
        for i in 0..product.nrows() {
            tr += product[(i, i)];
        }
        Some(tr.re)
    } else {
        None
    };

    let max_block_population = state
        .block_strings
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let offsets = num_offsets(range);
    let block_volume: usize = range.per_axis().iter().product();
    let bound_constant =
        fp::<F>(offsets as f64) * fp::<F>(4.0f64.powi(block_volume as i32));

    let sum_abs_coeff = o.one_norm();
    let spectral_norm = operator_norm(o, lattice.num_sites())?;

    // the chain behind the bound, each step checkable on its own:
    // pigeonhole, per-block dilution, trace vs operator norm, and the
    // composite inequality
    let slack = fp::<F>(1e-9) * F::one().max(sum_abs_coeff);
    let pigeonhole = sum_at_offset * fp::<F>(offsets as f64) >= sum_abs_coeff - slack;
    let dilution = trace_analytic * fp::<F>(max_block_population.max(1) as f64)
        >= sum_at_offset - slack;
    let trace_bounded = trace_analytic <= spectral_norm + slack;
    let population_bounded = max_block_population as u128 <= 4u128.pow(block_volume as u32);
    let composite = sum_abs_coeff <= bound_constant * spectral_norm + slack;
    let dense_consistent = trace_dense
        .map(|t| (t - trace_analytic).abs() <= fp::<F>(1e-8) * F::one().max(trace_analytic))
        .unwrap_or(true);
    let pass = pigeonhole
        && dilution
        && trace_bounded
        && population_bounded
        && composite
        && dense_consistent;

    Ok(NormCertificate {
        sum_abs_coeff,
        num_offsets: offsets,
        offset: star_offset,
        sum_at_offset,
        trace_analytic,
        trace_dense,
        spectral_norm,
        max_block_population,
        bound_constant,
        pass,
    })
}
