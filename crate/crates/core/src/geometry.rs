//! Lattice geometry, Pauli strings, and the geometrically local string family.
//!
//! Sites live on a rectangular lattice with open boundaries and are addressed
//! by flat row-major indices (last axis fastest). Distances between sites are
//! Manhattan (l1) distances between coordinate vectors; the distance between
//! two operators is the minimum site distance between their supports.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Rectangular spin lattice with open boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    sides: Vec<usize>,
}

impl Lattice {
    /// Build a lattice from per-axis side lengths (all >= 1).
    pub fn new(sides: Vec<usize>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::arg("lattice needs at least one axis"));
        }
        if sides.iter().any(|&s| s == 0) {
            return Err(Error::arg("lattice side lengths must be >= 1"));
        }
        Ok(Lattice { sides })
    }

    /// 1D chain of `n` sites.
    pub fn chain(n: usize) -> Result<Self> {
        Lattice::new(vec![n])
    }

    pub fn dims(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    /// Total number of sites.
    pub fn num_sites(&self) -> usize {
        self.sides.iter().product()
    }

    /// Coordinates of a flat site index (row-major, last axis fastest).
    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        debug_assert!(site < self.num_sites());
        let mut rem = site;
        let mut coords = vec![0; self.dims()];
        for k in (0..self.dims()).rev() {
            coords[k] = rem % self.sides[k];
            rem /= self.sides[k];
        }
        coords
    }

    /// Flat index of a coordinate vector.
    pub fn site_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims());
        let mut idx = 0;
        for k in 0..self.dims() {
            debug_assert!(coords[k] < self.sides[k]);
            idx = idx * self.sides[k] + coords[k];
        }
        idx
    }

    /// Manhattan distance between two sites.
    pub fn qubit_distance(&self, a: usize, b: usize) -> usize {
        let ca = self.site_coords(a);
        let cb = self.site_coords(b);
        ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| x.abs_diff(y))
            .sum()
    }

    /// Largest site-to-site distance on the lattice.
    pub fn diameter(&self) -> usize {
        self.sides.iter().map(|&s| s - 1).sum()
    }

    /// Nearest-neighbor pairs `(i, j)` with `i < j`, sorted lexicographically.
    ///
    /// This order defines the coupling-parameter indexing used everywhere
    /// downstream (instance files, observable ids, importance reports).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let n = self.num_sites();
        for site in 0..n {
            let coords = self.site_coords(site);
            for k in 0..self.dims() {
                if coords[k] + 1 < self.sides[k] {
                    let mut nb = coords.clone();
                    nb[k] += 1;
                    out.push((site, self.site_index(&nb)));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Per-axis range bounds for the geometrically local string family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoRange {
    per_axis: Vec<usize>,
}

impl GeoRange {
    /// Per-axis bounds (all >= 1); must match the lattice dimension at use.
    pub fn new(per_axis: Vec<usize>) -> Result<Self> {
        if per_axis.is_empty() || per_axis.iter().any(|&r| r == 0) {
            return Err(Error::arg("range bounds must be >= 1 on every axis"));
        }
        Ok(GeoRange { per_axis })
    }

    /// The same bound on every axis.
    pub fn uniform(dims: usize, r: usize) -> Result<Self> {
        GeoRange::new(vec![r; dims])
    }

    pub fn per_axis(&self) -> &[usize] {
        &self.per_axis
    }

    pub fn dims(&self) -> usize {
        self.per_axis.len()
    }

    /// Product of the per-axis bounds (sites per certificate block).
    pub fn block_volume(&self) -> usize {
        self.per_axis.iter().product()
    }
}

/// Single-site Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    X,
    Y,
    Z,
}

impl PauliOp {
    pub const ALL: [PauliOp; 3] = [PauliOp::X, PauliOp::Y, PauliOp::Z];

    pub fn letter(self) -> char {
        match self {
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }

    /// 0, 1, 2 for X, Y, Z (used by snapshot encodings).
    pub fn index(self) -> u8 {
        match self {
            PauliOp::X => 0,
            PauliOp::Y => 1,
            PauliOp::Z => 2,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(PauliOp::X),
            1 => Ok(PauliOp::Y),
            2 => Ok(PauliOp::Z),
            _ => Err(Error::format(format!("invalid Pauli letter index {i}"))),
        }
    }
}

/// Tensor product of Pauli letters on a sparse site set.
///
/// Stored as `(site, letter)` pairs strictly sorted by site; the empty string
/// is the identity. Ordering is lexicographic by support first, then by
/// letters, which is the canonical enumeration order of the local family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    ops: Vec<(usize, PauliOp)>,
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString { ops: Vec::new() }
    }

    pub fn single(site: usize, op: PauliOp) -> Self {
        PauliString { ops: vec![(site, op)] }
    }

    /// Build from `(site, letter)` pairs; rejects duplicate sites.
    pub fn new(mut pairs: Vec<(usize, PauliOp)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(s, _)| s);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::arg("duplicate site in Pauli string"));
        }
        Ok(PauliString { ops: pairs })
    }

    pub fn ops(&self) -> &[(usize, PauliOp)] {
        &self.ops
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.iter().map(|&(s, _)| s)
    }

    pub fn support_vec(&self) -> Vec<usize> {
        self.support().collect()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn letter_at(&self, site: usize) -> Option<PauliOp> {
        self.ops
            .binary_search_by_key(&site, |&(s, _)| s)
            .ok()
            .map(|i| self.ops[i].1)
    }

    /// Per-axis support extent `max - min` (zeros for the identity).
    pub fn extent_per_axis(&self, lat: &Lattice) -> Vec<usize> {
        let d = lat.dims();
        if self.is_identity() {
            return vec![0; d];
        }
        let mut lo = vec![usize::MAX; d];
        let mut hi = vec![0usize; d];
        for s in self.support() {
            let c = lat.site_coords(s);
            for k in 0..d {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (0..d).map(|k| hi[k] - lo[k]).collect()
    }

    /// Whether the per-axis extent stays within the range bounds.
    pub fn fits_range(&self, lat: &Lattice, range: &GeoRange) -> bool {
        self.extent_per_axis(lat)
            .iter()
            .zip(range.per_axis())
            .all(|(&e, &r)| e <= r)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for &(site, op) in &self.ops {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", op.letter(), site)?;
            first = false;
        }
        Ok(())
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let sup = self.support().cmp(other.support());
        if sup != std::cmp::Ordering::Equal {
            return sup;
        }
        self.ops
            .iter()
            .map(|&(_, op)| op)
            .cmp(other.ops.iter().map(|&(_, op)| op))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum site distance between two non-empty supports.
pub fn obs_distance(lat: &Lattice, a: &[usize], b: &[usize]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("observable distance undefined for empty support"));
    }
    let mut best = usize::MAX;
    for &s in a {
        for &t in b {
            best = best.min(lat.qubit_distance(s, t));
        }
    }
    Ok(best)
}

/// Enumerate every non-identity Pauli string whose per-axis support extent is
/// within the range bounds, in canonical order (support-lex, then letter-lex).
///
/// The family size grows linearly in the number of sites with a constant
/// that is exponential in the range volume, so this is intended for small
/// ranges.
pub fn enumerate_geo_paulis(lat: &Lattice, range: &GeoRange) -> Result<Vec<PauliString>> {
    if range.dims() != lat.dims() {
        return Err(Error::arg(format!(
            "range has {} axes but lattice has {}",
            range.dims(),
            lat.dims()
        )));
    }
    let n = lat.num_sites();
    let coords: Vec<Vec<usize>> = (0..n).map(|s| lat.site_coords(s)).collect();
    let mut out = Vec::new();
    let mut support = Vec::new();
    for start in 0..n {
        support.push(start);
        emit_letterings(&support, &mut out);
        grow_support(lat, range, &coords, &mut support, &mut out);
        support.pop();
    }
    Ok(out)
}

/// Depth-first extension of `support` with larger site indices, pruned by the
/// extent bounds. Visits supports in lexicographic order.
fn grow_support(
    lat: &Lattice,
    range: &GeoRange,
    coords: &[Vec<usize>],
    support: &mut Vec<usize>,
    out: &mut Vec<PauliString>,
) {
    let d = lat.dims();
    let last = *support.last().unwrap();
    'cand: for next in last + 1..lat.num_sites() {
        for k in 0..d {
            let mut lo = coords[next][k];
            let mut hi = coords[next][k];
            for &s in support.iter() {
                lo = lo.min(coords[s][k]);
                hi = hi.max(coords[s][k]);
            }
            if hi - lo > range.per_axis()[k] {
                continue 'cand;
            }
        }
        support.push(next);
        emit_letterings(support, out);
        grow_support(lat, range, coords, support, out);
        support.pop();
    }
}

/// All 3^k letter assignments for a fixed support, in letter-lex order.
fn emit_letterings(support: &[usize], out: &mut Vec<PauliString>) {
    let k = support.len();
    let mut digits = vec![0u8; k];
    loop {
        let ops = support
            .iter()
            .zip(&digits)
            .map(|(&s, &d)| (s, PauliOp::ALL[d as usize]))
            .collect();
        out.push(PauliString { ops });
        // odometer with the last site fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if digits[pos] < 2 {
                digits[pos] += 1;
                for d in digits[pos + 1..].iter_mut() {
                    *d = 0;
                }
                break;
            }
        }
    }
}
