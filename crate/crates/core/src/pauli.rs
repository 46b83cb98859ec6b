//! Pauli-sum operators and their action on state vectors.
//!
//! A [`PauliSum`] is a real-linear combination of [`PauliString`]s, i.e. a
//! Hermitian operator. Strings act on computational-basis amplitudes through
//! symplectic bit masks: with `xmask` the X/Y sites and `zmask` the Y/Z
//! sites of a string `P`,
//!
//! ```text
//! (P psi)[b ^ xmask] = i^{#Y} * (-1)^{popcount(b & zmask)} * psi[b]
//! ```
//!
//! where site `q` maps to bit `q` of the basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{PauliOp, PauliString};
use crate::scalar::{fp, Scalar};

/// Real-linear combination of Pauli strings (a Hermitian operator).
///
/// Zero coefficients are never stored; iteration order is the canonical
/// string order, so serialization and arithmetic are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum<F: Scalar> {
    terms: BTreeMap<PauliString, F>,
}

impl<F: Scalar> Default for PauliSum<F> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<F: Scalar> PauliSum<F> {
    pub fn zero() -> Self {
        PauliSum { terms: BTreeMap::new() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (PauliString, F)>) -> Self {
        let mut sum = PauliSum::zero();
        for (p, a) in terms {
            sum.add_term(p, a);
        }
        sum
    }

    /// Accumulate `alpha * P`, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, p: PauliString, alpha: F) {
        if alpha == F::zero() {
            return;
        }
        match self.terms.entry(p) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + alpha;
                if v == F::zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(alpha);
            }
        }
    }

    /// Accumulate a whole sum scaled by `factor`.
    pub fn add_scaled(&mut self, other: &PauliSum<F>, factor: F) {
        for (p, &a) in other.terms() {
            self.add_term(p.clone(), a * factor);
        }
    }

    pub fn scale(&mut self, factor: F) {
        if factor == F::zero() {
            self.terms.clear();
            return;
        }
        for v in self.terms.values_mut() {
            *v *= factor;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &F)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> F {
        self.terms.get(p).copied().unwrap_or_else(F::zero)
    }

    /// Sum of absolute coefficients.
    pub fn one_norm(&self) -> F {
        self.terms
            .values()
            .fold(F::zero(), |acc, &v| acc + v.abs())
    }

    /// Sum of squared coefficients.
    pub fn sq_norm(&self) -> F {
        self.terms.values().fold(F::zero(), |acc, &v| acc + v * v)
    }

    /// Whether an identity component is present.
    pub fn has_identity(&self) -> bool {
        self.terms.contains_key(&PauliString::identity())
    }

    /// Largest site index touched by any string, if any site is touched.
    pub fn max_site(&self) -> Option<usize> {
        self.terms
            .keys()
            .filter_map(|p| p.support().max())
            .max()
    }

    /// Union of the supports of all strings, sorted.
    pub fn support_sites(&self) -> Vec<usize> {
        let mut sites: Vec<usize> = self
            .terms
            .keys()
            .flat_map(|p| p.support())
            .collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    /// Dense matrix on `n` sites (capacity-capped by the caller).
    pub fn dense(&self, n: usize) -> Result<DMatrix<Complex<F>>> {
        let dim = checked_dim(n)?;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, &a) in self.terms() {
            let masks = StringMasks::new(p, n)?;
            let ac = Complex::new(a, F::zero());
            for b in 0..dim {
                let (tgt, ph) = masks.image(b);
                m[(tgt, b)] += ac * ph;
            }
        }
        Ok(m)
    }
}

/// 2^n with an argument check against the address space.
pub(crate) fn checked_dim(n: usize) -> Result<usize> {
    if n >= usize::BITS as usize - 1 {
        return Err(Error::capacity(format!("2^{n} amplitudes do not fit in memory")));
    }
    Ok(1usize << n)
}

/// Bit-mask form of a single Pauli string on `n` sites.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StringMasks<F: Scalar> {
    pub xmask: u64,
    pub zmask: u64,
    /// i^{#Y}
    pub phase: Complex<F>,
}

impl<F: Scalar> StringMasks<F> {
    pub fn new(p: &PauliString, n: usize) -> Result<Self> {
        let mut xmask = 0u64;
        let mut zmask = 0u64;
        let mut ycount = 0u32;
        for &(site, op) in p.ops() {
            if site >= n {
                return Err(Error::arg(format!(
                    "string touches site {site} outside a {n}-site system"
                )));
            }
            let bit = 1u64 << site;
            match op {
                PauliOp::X => xmask |= bit,
                PauliOp::Y => {
                    xmask |= bit;
                    zmask |= bit;
                    ycount += 1;
                }
                PauliOp::Z => zmask |= bit,
            }
        }
        let phase = match ycount % 4 {
            0 => Complex::new(F::one(), F::zero()),
            1 => Complex::new(F::zero(), F::one()),
            2 => Complex::new(-F::one(), F::zero()),
            _ => Complex::new(F::zero(), -F::one()),
        };
        Ok(StringMasks { xmask, zmask, phase })
    }

    /// Image of basis state `b`: target index and amplitude factor.
    #[inline]
    pub fn image(&self, b: usize) -> (usize, Complex<F>) {
        let sign = if (b as u64 & self.zmask).count_ones() % 2 == 0 {
            F::one()
        } else {
            -F::one()
        };
        (b ^ self.xmask as usize, self.phase * sign)
    }

    /// Accumulate `coeff * P psi` into `out`.
    pub fn apply_accumulate(&self, coeff: Complex<F>, psi: &[Complex<F>], out: &mut [Complex<F>]) {
        for (b, &amp) in psi.iter().enumerate() {
            let (tgt, ph) = self.image(b);
            out[tgt] += coeff * ph * amp;
        }
    }

    /// Real expectation `<psi|P|psi>` (imaginary part cancels for Hermitian P).
    pub fn expectation(&self, psi: &[Complex<F>]) -> F {
        let mut acc = Complex::new(F::zero(), F::zero());
        for (b, &amp) in psi.iter().enumerate() {
            let (tgt, ph) = self.image(b);
            acc += psi[tgt].conj() * ph * amp;
        }
        acc.re
    }
}

/// Dense matrix of a single string embedded into an ordered site list.
///
/// `sites` gives the tensor factors (position `k` in the list maps to bit
/// `k`); every site in the string's support must appear in the list.
pub fn string_matrix_on<F: Scalar>(
    p: &PauliString,
    sites: &[usize],
) -> Result<DMatrix<Complex<F>>> {
    let mut local = Vec::with_capacity(p.weight());
    for &(site, op) in p.ops() {
        let pos = sites
            .iter()
            .position(|&s| s == site)
            .ok_or_else(|| Error::arg(format!("site {site} not in embedding list")))?;
        local.push((pos, op));
    }
    let local_string = PauliString::new(local)?;
    let k = sites.len();
    let dim = checked_dim(k)?;
    let masks = StringMasks::<F>::new(&local_string, k)?;
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let (tgt, ph) = masks.image(b);
        m[(tgt, b)] += ph;
    }
    Ok(m)
}

/// Matrix-free Hermitian operator: a Pauli sum with precomputed masks.
pub struct AssembledOperator<F: Scalar> {
    n: usize,
    terms: Vec<(StringMasks<F>, F)>,
    one_norm: F,
}

impl<F: Scalar> AssembledOperator<F> {
    /// Maximum system size for matrix-free application.
    pub const MAX_SITES: usize = 20;
    /// Maximum system size for dense materialization.
    pub const MAX_DENSE_SITES: usize = 12;

    pub fn new(sum: &PauliSum<F>, n: usize) -> Result<Self> {
        if n > Self::MAX_SITES {
            return Err(Error::capacity(format!(
                "{n} sites exceeds the {}-site operator cap",
                Self::MAX_SITES
            )));
        }
        if let Some(max) = sum.max_site() {
            if max >= n {
                return Err(Error::arg(format!(
                    "operator touches site {max} outside a {n}-site system"
                )));
            }
        }
        let mut terms = Vec::with_capacity(sum.len());
        for (p, &a) in sum.terms() {
            terms.push((StringMasks::new(p, n)?, a));
        }
        Ok(AssembledOperator { n, terms, one_norm: sum.one_norm() })
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Pauli-coefficient 1-norm (an upper bound on the operator norm).
    pub fn coeff_one_norm(&self) -> F {
        self.one_norm
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[Complex<F>], out: &mut [Complex<F>]) {
        debug_assert_eq!(psi.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for v in out.iter_mut() {
            *v = Complex::new(F::zero(), F::zero());
        }
        for &(masks, coeff) in &self.terms {
            masks.apply_accumulate(Complex::new(coeff, F::zero()), psi, out);
        }
    }

    pub fn apply_vec(&self, psi: &DVector<Complex<F>>) -> DVector<Complex<F>> {
        let mut out = DVector::from_element(self.dim(), Complex::new(F::zero(), F::zero()));
        self.apply(psi.as_slice(), out.as_mut_slice());
        out
    }

    /// Dense matrix (small systems only).
    pub fn dense(&self) -> Result<DMatrix<Complex<F>>> {
        if self.n > Self::MAX_DENSE_SITES {
            return Err(Error::capacity(format!(
                "{} sites exceeds the {}-site dense cap",
                self.n,
                Self::MAX_DENSE_SITES
            )));
        }
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for &(masks, coeff) in &self.terms {
            let c = Complex::new(coeff, F::zero());
            for b in 0..dim {
                let (tgt, ph) = masks.image(b);
                m[(tgt, b)] += c * ph;
            }
        }
        Ok(m)
    }
}

/// Expand a Hermitian matrix on an ordered site list into Pauli coefficients.
///
/// `block` must be `2^k x 2^k` for `k = sites.len()` with `k <= 4`, and
/// Hermitian to within `1e-10` in max-entry asymmetry. Coefficients come out
/// real; entries below `1e-14` are dropped.
pub fn decompose_on_sites<F: Scalar>(
    block: &DMatrix<Complex<F>>,
    sites: &[usize],
) -> Result<PauliSum<F>> {
    let k = sites.len();
    if k > 4 {
        return Err(Error::capacity(format!(
            "decomposition supports at most 4 sites, got {k}"
        )));
    }
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("embedding site list must be strictly increasing"));
    }
    let dim = 1usize << k;
    if block.nrows() != dim || block.ncols() != dim {
        return Err(Error::arg(format!(
            "matrix is {}x{} but {k} sites need {dim}x{dim}",
            block.nrows(),
            block.ncols()
        )));
    }
    let herm_tol = fp::<F>(1e-10);
    for i in 0..dim {
        for j in 0..dim {
            let asym = (block[(i, j)] - block[(j, i)].conj()).norm_sqr().sqrt();
            if asym > herm_tol {
                let shown = asym.to_f64().unwrap_or(f64::NAN);
                return Err(Error::arg(format!(
                    "matrix is not Hermitian (asymmetry {shown:.3e} at ({i},{j}))"
                )));
            }
        }
    }
    let drop_tol = fp::<F>(1e-14);
    let dimf = fp::<F>(dim as f64);
    let mut sum = PauliSum::zero();
    // iterate all 4^k letter assignments (I included) over the local sites
    let mut digits = vec![0u8; k];
    loop {
        let mut local = Vec::new();
        for (pos, &d) in digits.iter().enumerate() {
            if d > 0 {
                local.push((pos, PauliOp::ALL[(d - 1) as usize]));
            }
        }
        let local_string = PauliString::new(local.clone())?;
        let masks = StringMasks::<F>::new(&local_string, k)?;
        // alpha = Tr(P M) / 2^k, computed through the sparse action of P
        let mut tr = Complex::new(F::zero(), F::zero());
        for b in 0..dim {
            let (tgt, ph) = masks.image(b);
            tr += ph * block[(b, tgt)];
        }
        let alpha = tr.re / dimf;
        if alpha.abs() > drop_tol {
            let global: Vec<(usize, PauliOp)> =
                local.iter().map(|&(pos, op)| (sites[pos], op)).collect();
            sum.add_term(PauliString::new(global)?, alpha);
        }
        let mut pos = k;
        let mut done = true;
        while pos > 0 {
            pos -= 1;
            if digits[pos] < 3 {
                digits[pos] += 1;
                for d in digits[pos + 1..].iter_mut() {
                    *d = 0;
                }
                done = false;
                break;
            }
        }
        if done {
            break;
        }
    }
    Ok(sum)
}
