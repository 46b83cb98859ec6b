//! Randomized single-qubit measurement snapshots and their estimators.
//!
//! Each snapshot picks a uniformly random basis in {X, Y, Z} per qubit,
//! rotates the state accordingly, and samples a computational-basis outcome
//! with exact Born probabilities. A Pauli expectation is then estimated by
//! the inverse-channel rule: snapshots whose bases match the string's
//! letters on its whole support contribute `3^|support| * product of
//! outcomes`, all others contribute zero.
//!
//! Snapshots store one byte per (snapshot, qubit): bits 0-1 the basis index
//! (X=0, Y=1, Z=2), bit 2 the outcome (0 -> +1, 1 -> -1). The same record
//! layout is used in the fixed-width binary file format.

use nalgebra::DVector;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PauliOp, PauliString};
use crate::hamiltonian::GroundState;
use crate::pauli::PauliSum;
use crate::scalar::{fp, Scalar};

/// Largest Pauli support the estimator accepts (variance blows up beyond).
pub const MAX_ESTIMATED_SUPPORT: usize = 4;

const FILE_MAGIC: &[u8; 4] = b"GSSH";
const FILE_VERSION: u16 = 1;
pub const CSV_HEADER: &str = "# format: gsml.shadows.v1";

/// A batch of measurement snapshots of one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowSet {
    n: usize,
    seed: u64,
    /// One record byte per qubit per snapshot.
    records: Vec<u8>,
}

impl ShadowSet {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.records.len() / self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Seed the snapshots were drawn with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn record(&self, snapshot: usize, qubit: usize) -> u8 {
        self.records[snapshot * self.n + qubit]
    }

    /// Basis and outcome (+1/-1) measured on one qubit of one snapshot.
    pub fn measurement(&self, snapshot: usize, qubit: usize) -> (PauliOp, i8) {
        let r = self.record(snapshot, qubit);
        let basis = PauliOp::from_index(r & 0b11).expect("valid stored basis");
        let outcome = if r & 0b100 == 0 { 1 } else { -1 };
        (basis, outcome)
    }

    /// The first `t` snapshots, sharing this set's seed and stream.
    ///
    /// Prefixes of one generation are how paired comparisons across
    /// snapshot budgets are built.
    pub fn prefix(&self, t: usize) -> Result<ShadowSet> {
        if t > self.len() {
            return Err(Error::arg(format!(
                "prefix of {t} snapshots requested from a set of {}",
                self.len()
            )));
        }
        Ok(ShadowSet {
            n: self.n,
            seed: self.seed,
            records: self.records[..t * self.n].to_vec(),
        })
    }

    /// Estimate `Tr(P rho)` by the plain mean over snapshots.
    pub fn estimate_pauli<F: Scalar>(&self, p: &PauliString) -> Result<F> {
        self.estimate_pauli_batched(p, 1)
    }

    /// Estimate `Tr(P rho)` by a median of `batches` batch means.
    ///
    /// Batches are consecutive snapshot blocks of near-equal size;
    /// `batches = 1` reduces to the plain mean.
    pub fn estimate_pauli_batched<F: Scalar>(&self, p: &PauliString, batches: usize) -> Result<F> {
        self.check_estimable(p)?;
        let t = self.len();
        if t == 0 {
            return Err(Error::arg("cannot estimate from an empty snapshot set"));
        }
        if batches == 0 || batches > t {
            return Err(Error::arg(format!(
                "batch count {batches} invalid for {t} snapshots"
            )));
        }
        let mut means = Vec::with_capacity(batches);
        let base = t / batches;
        let extra = t % batches;
        let mut start = 0;
        for b in 0..batches {
            let size = base + usize::from(b < extra);
            let mut acc = 0i64;
            for s in start..start + size {
                acc += self.single_snapshot_value(s, p);
            }
            means.push(fp::<F>(acc as f64) / fp::<F>(size as f64));
            start += size;
        }
        means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
        let mid = means.len() / 2;
        if means.len() % 2 == 1 {
            Ok(means[mid])
        } else {
            Ok((means[mid - 1] + means[mid]) / fp::<F>(2.0))
        }
    }

    /// Snapshot means and their standard error for one string.
    ///
    /// Returns `(mean, standard error of the mean)`.
    pub fn estimate_pauli_with_se<F: Scalar>(&self, p: &PauliString) -> Result<(F, F)> {
        self.check_estimable(p)?;
        let t = self.len();
        if t < 2 {
            return Err(Error::arg("standard error needs at least two snapshots"));
        }
        let mut sum = 0i64;
        let mut sum_sq = 0i64;
        for s in 0..t {
            let v = self.single_snapshot_value(s, p);
            sum += v;
            sum_sq += v * v;
        }
        let tf = fp::<F>(t as f64);
        let mean = fp::<F>(sum as f64) / tf;
        let var = (fp::<F>(sum_sq as f64) / tf - mean * mean) * tf / (tf - F::one());
        Ok((mean, (var / tf).max(F::zero()).sqrt()))
    }

    /// Estimate an observable as the coefficient-weighted sum of string
    /// estimates. Every string must be estimable (non-identity, support
    /// at most [`MAX_ESTIMATED_SUPPORT`]).
    pub fn estimate_observable<F: Scalar>(&self, o: &PauliSum<F>) -> Result<F> {
        let mut acc = F::zero();
        for (p, &a) in o.terms() {
            acc += a * self.estimate_pauli::<F>(p)?;
        }
        Ok(acc)
    }

    fn check_estimable(&self, p: &PauliString) -> Result<()> {
        if p.is_identity() {
            return Err(Error::arg("cannot estimate the identity string"));
        }
        if p.weight() > MAX_ESTIMATED_SUPPORT {
            return Err(Error::arg(format!(
                "support {} exceeds the estimator cap {}",
                p.weight(),
                MAX_ESTIMATED_SUPPORT
            )));
        }
        if let Some(max) = p.support().max() {
            if max >= self.n {
                return Err(Error::arg(format!(
                    "string touches qubit {max} outside the {}-qubit snapshots",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// `3^k * prod(outcomes)` when all bases match, else 0.
    #[inline]
    fn single_snapshot_value(&self, snapshot: usize, p: &PauliString) -> i64 {
        let mut value = 1i64;
        for &(site, op) in p.ops() {
            let r = self.record(snapshot, site);
            if r & 0b11 != op.index() {
                return 0;
            }
            value *= if r & 0b100 == 0 { 3 } else { -3 };
        }
        value
    }

    /// Fixed-width binary dump: magic, version, n, T, seed, then records.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(FILE_MAGIC)?;
        w.write_all(&FILE_VERSION.to_le_bytes())?;
        w.write_all(&[0u8; 2])?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.records)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<ShadowSet> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut head = [0u8; 4];
        r.read_exact(&mut head)?;
        if &head != FILE_MAGIC {
            return Err(Error::format("not a snapshot file (bad magic)"));
        }
        let mut small = [0u8; 2];
        r.read_exact(&mut small)?;
        let version = u16::from_le_bytes(small);
        if version != FILE_VERSION {
            return Err(Error::format(format!(
                "snapshot file version {version} unsupported (expected {FILE_VERSION})"
            )));
        }
        r.read_exact(&mut small)?;
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let t = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let seed = u64::from_le_bytes(word);
        let mut records = vec![0u8; n * t];
        r.read_exact(&mut records)?;
        for &b in &records {
            if b & 0b11 == 3 || b & !0b111 != 0 {
                return Err(Error::format("corrupt snapshot record"));
            }
        }
        Ok(ShadowSet { n, seed, records })
    }

    /// CSV alternative: one row per (snapshot, qubit).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{CSV_HEADER}")?;
        writeln!(w, "snapshot_id,qubit,basis,outcome")?;
        for s in 0..self.len() {
            for q in 0..self.n {
                let (basis, outcome) = self.measurement(s, q);
                writeln!(w, "{s},{q},{},{outcome}", basis.letter())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parse the CSV form; the seed is not recoverable from CSV and is set
    /// to the given value.
    pub fn read_csv(path: &Path, seed: u64) -> Result<ShadowSet> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut rows: Vec<(usize, usize, u8, bool)> = Vec::new();
        let mut n = 0usize;
        let mut t = 0usize;
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("snapshot_id")
            {
                continue;
            }
            let parts: Vec<&str> = trimmed.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::format(format!("bad snapshot CSV row {}", ln + 1)));
            }
            let s: usize = parts[0]
                .parse()
                .map_err(|_| Error::format(format!("bad snapshot id on row {}", ln + 1)))?;
            let q: usize = parts[1]
                .parse()
                .map_err(|_| Error::format(format!("bad qubit on row {}", ln + 1)))?;
            let basis = match parts[2] {
                "X" => 0u8,
                "Y" => 1,
                "Z" => 2,
                other => {
                    return Err(Error::format(format!("bad basis letter {other:?}")));
                }
            };
            let outcome = match parts[3] {
                "1" => false,
                "-1" => true,
                other => {
                    return Err(Error::format(format!("bad outcome {other:?}")));
                }
            };
            n = n.max(q + 1);
            t = t.max(s + 1);
            rows.push((s, q, basis, outcome));
        }
        if rows.len() != n * t {
            return Err(Error::format(format!(
                "snapshot CSV has {} records, expected {}x{}",
                rows.len(),
                t,
                n
            )));
        }
        let mut records = vec![u8::MAX; n * t];
        for (s, q, basis, outcome) in rows {
            records[s * n + q] = basis | (u8::from(outcome) << 2);
        }
        if records.iter().any(|&b| b == u8::MAX) {
            return Err(Error::format("snapshot CSV is missing records"));
        }
        Ok(ShadowSet { n, seed, records })
    }
}

/// Draw `t` snapshots of a ground-state mixture.
///
/// Sampling is exact: per snapshot, bases are drawn first (qubit order),
/// then each component draws a uniformly random multiplet member, rotates
/// it, and samples an outcome from the rotated amplitudes; free sites get
/// unbiased coin flips. Deterministic in `seed`.
pub fn sample_shadow<F: Scalar>(gs: &GroundState<F>, t: usize, seed: u64) -> Result<ShadowSet> {
    let factors: Vec<(Vec<usize>, &[DVector<Complex<F>>])> = gs
        .components()
        .iter()
        .map(|c| (c.sites.clone(), c.basis.as_slice()))
        .collect();
    sample_from_factors(gs.num_sites(), &factors, gs.free_sites(), t, seed)
}

/// Draw `t` snapshots of an explicit pure state on `n` qubits.
pub fn sample_shadow_from_state<F: Scalar>(
    psi: &DVector<Complex<F>>,
    n: usize,
    t: usize,
    seed: u64,
) -> Result<ShadowSet> {
    if psi.len() != 1 << n {
        return Err(Error::arg(format!(
            "state has {} amplitudes, expected 2^{n}",
            psi.len()
        )));
    }
    let norm = psi.norm();
    if (norm - F::one()).abs() > fp::<F>(1e-8) {
        return Err(Error::arg("state vector must be normalized"));
    }
    let basis = vec![psi.clone()];
    let factors = vec![((0..n).collect::<Vec<_>>(), basis.as_slice())];
    sample_from_factors(n, &factors, &[], t, seed)
}

fn sample_from_factors<F: Scalar>(
    n: usize,
    factors: &[(Vec<usize>, &[DVector<Complex<F>>])],
    free_sites: &[usize],
    t: usize,
    seed: u64,
) -> Result<ShadowSet> {
    if n == 0 {
        return Err(Error::arg("cannot sample snapshots of zero qubits"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records = vec![0u8; n * t];
    let mut rotated: Vec<Complex<F>> = Vec::new();
    for s in 0..t {
        let row = &mut records[s * n..(s + 1) * n];
        for r in row.iter_mut() {
            *r = rng.gen_range(0..3u8);
        }
        for (sites, basis) in factors {
            let pick = if basis.len() > 1 {
                rng.gen_range(0..basis.len())
            } else {
                0
            };
            rotated.clear();
            rotated.extend(basis[pick].iter().copied());
            for (pos, &site) in sites.iter().enumerate() {
                rotate_qubit(&mut rotated, pos, row[site] & 0b11);
            }
            // walk the cumulative Born distribution
            let draw = fp::<F>(rng.gen::<f64>());
            let mut acc = F::zero();
            let mut outcome = rotated.len() - 1;
            for (idx, amp) in rotated.iter().enumerate() {
                acc += amp.norm_sqr();
                if draw < acc {
                    outcome = idx;
                    break;
                }
            }
            for (pos, &site) in sites.iter().enumerate() {
                if outcome >> pos & 1 == 1 {
                    row[site] |= 0b100;
                }
            }
        }
        for &site in free_sites {
            if rng.gen_range(0..2u8) == 1 {
                row[site] |= 0b100;
            }
        }
    }
    Ok(ShadowSet { n, seed, records })
}

/// Rotate qubit `pos` of a state so the requested basis becomes computational.
///
/// X uses the Hadamard; Y uses Hadamard after S-dagger; Z is a no-op.
fn rotate_qubit<F: Scalar>(amps: &mut [Complex<F>], pos: usize, basis: u8) {
    if basis == 2 {
        return;
    }
    let bit = 1usize << pos;
    let inv_sqrt2 = Complex::new(F::one() / fp::<F>(2.0).sqrt(), F::zero());
    let i = Complex::new(F::zero(), F::one());
    let mut idx = 0usize;
    while idx < amps.len() {
        if idx & bit == 0 {
            let lo = amps[idx];
            let hi = amps[idx | bit];
            let (new_lo, new_hi) = if basis == 0 {
                (lo + hi, lo - hi)
            } else {
                (lo - i * hi, lo + i * hi)
            };
            amps[idx] = new_lo * inv_sqrt2;
            amps[idx | bit] = new_hi * inv_sqrt2;
        }
        idx += 1;
    }
}
