//! Feature maps over the coupling space of a parameterized Hamiltonian.
//!
//! Both maps exploit locality: a geometrically local observable only feels
//! couplings near its support, so each feature depends on a small window of
//! the parameter vector.
//!
//! * [`IndicatorMap`] — one block of one-hot features per Pauli string of
//!   the geometrically local family. The couplings near the string are
//!   snapped to a regular grid over `[-1, 1]^k` and the block activates the
//!   cell the point falls in.
//! * [`RffMap`] — random Fourier features per Hamiltonian term. Each term
//!   owns a window of nearby couplings; projecting the window onto fixed
//!   Gaussian directions and taking cosine/sine pairs yields features whose
//!   inner products approximate a Gaussian kernel on the window.
//!
//! Feature maps operate on *centered* coordinates in `[-1, 1]`; couplings
//! drawn from `[0, 2]` are shifted with [`centered_coordinates`].

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PauliString;
use crate::hamiltonian::ParamHamiltonian;
use crate::scalar::{fp, Scalar};

/// Hard cap on the total feature count of a map.
pub const MAX_FEATURES: u64 = 1 << 48;

/// Slack admitted when validating that coordinates lie in `[-1, 1]`.
const DOMAIN_SLACK: f64 = 1e-9;

/// Map couplings from `[0, 2]` to the feature domain `[-1, 1]`.
pub fn centered_coordinates<F: Scalar>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| v - F::one()).collect()
}

/// Smallest pairwise distance between two site sets.
fn set_distance(
    lattice: &crate::geometry::Lattice,
    a: &[usize],
    b: &[usize],
) -> Result<usize> {
    let mut best = None;
    for &s in a {
        for &t in b {
            let d = lattice.qubit_distance(s, t);
            best = Some(best.map_or(d, |c: usize| c.min(d)));
        }
    }
    best.ok_or_else(|| Error::arg("distance between empty site sets is undefined"))
}

/// Indices of parameters whose interaction terms act within distance
/// `delta1` of `sites`, in ascending order.
pub fn nearby_params<F: Scalar>(
    ham: &ParamHamiltonian<F>,
    sites: &[usize],
    delta1: usize,
) -> Result<Vec<usize>> {
    if sites.is_empty() {
        return Err(Error::arg("parameter window of an empty site set is undefined"));
    }
    let mut out = Vec::new();
    for term in ham.terms() {
        if set_distance(ham.lattice(), term.sites(), sites)? <= delta1 {
            out.extend(term.params());
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Regular grid `{0, ±δ, ±2δ, …, ±1}` on each axis of `[-1, 1]^k`.
///
/// The resolution is stored as the integer `1/δ`, so the endpoints are
/// always grid points. A coordinate is assigned to its nearest grid point,
/// with midpoints between two grid points assigned to the upper one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    delta2_inv: u64,
}

impl GridSpec {
    pub fn new(delta2_inv: u64) -> Result<Self> {
        if delta2_inv == 0 {
            return Err(Error::arg("grid resolution 1/δ must be at least 1"));
        }
        Ok(GridSpec { delta2_inv })
    }

    pub fn delta2<F: Scalar>(&self) -> F {
        F::one() / fp::<F>(self.delta2_inv as f64)
    }

    /// Grid points per axis: `2/δ + 1`.
    pub fn points_per_axis(&self) -> u64 {
        2 * self.delta2_inv + 1
    }

    /// Cell index (0-based from the `-1` end) of a coordinate in `[-1, 1]`.
    pub fn cell_of<F: Scalar>(&self, coord: F) -> Result<u64> {
        let q = coord
            .to_f64()
            .ok_or_else(|| Error::numeric("coordinate does not convert to f64"))?;
        if !q.is_finite() || q.abs() > 1.0 + DOMAIN_SLACK {
            return Err(Error::arg(format!(
                "coordinate {q} outside the feature domain [-1, 1]"
            )));
        }
        let inv = self.delta2_inv as f64;
        let k = (q * inv + 0.5).floor() as i64;
        let k = k.clamp(-(self.delta2_inv as i64), self.delta2_inv as i64);
        Ok((k + self.delta2_inv as i64) as u64)
    }

    /// Coordinate of a cell's grid point.
    pub fn grid_value<F: Scalar>(&self, cell: u64) -> Result<F> {
        if cell >= self.points_per_axis() {
            return Err(Error::arg(format!(
                "cell {cell} out of range for {} grid points",
                self.points_per_axis()
            )));
        }
        Ok(fp::<F>(cell as f64 - self.delta2_inv as f64) * self.delta2::<F>())
    }
}

/// One one-hot block of an [`IndicatorMap`]: the grid over the couplings
/// near one Pauli string.
#[derive(Debug, Clone)]
pub struct IndicatorBlock {
    string: PauliString,
    params: Vec<usize>,
    offset: u64,
    cells: u64,
}

impl IndicatorBlock {
    pub fn string(&self) -> &PauliString {
        &self.string
    }

    /// Parameter window the block looks at, ascending.
    pub fn params(&self) -> &[usize] {
        &self.params
    }

    /// First feature index of the block.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Number of cells (= features) in the block.
    pub fn cells(&self) -> u64 {
        self.cells
    }
}

/// One-hot grid features, one block per string of a Pauli family.
#[derive(Debug, Clone)]
pub struct IndicatorMap<F: Scalar> {
    blocks: Vec<IndicatorBlock>,
    grid: GridSpec,
    delta1: usize,
    num_params: usize,
    m_phi: u64,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> IndicatorMap<F> {
    /// Build the map for `family` against the coupling layout of `ham`.
    ///
    /// `delta1` is the distance cutoff defining each string's coupling
    /// window; `grid` fixes the per-axis resolution.
    pub fn build(
        ham: &ParamHamiltonian<F>,
        family: &[PauliString],
        delta1: usize,
        grid: GridSpec,
    ) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::arg("cannot build an indicator map for an empty family"));
        }
        let ppa = grid.points_per_axis() as u128;
        let mut blocks = Vec::with_capacity(family.len());
        let mut offset: u64 = 0;
        for p in family {
            if p.is_identity() {
                return Err(Error::arg("identity string has no coupling window"));
            }
            let support: Vec<usize> = p.support().collect();
            let params = nearby_params(ham, &support, delta1)?;
            let mut cells: u128 = 1;
            for _ in &params {
                cells = cells.saturating_mul(ppa);
                if cells > MAX_FEATURES as u128 {
                    return Err(Error::capacity(format!(
                        "block for {p} needs {} axes of {} points, beyond the {} feature cap",
                        params.len(),
                        grid.points_per_axis(),
                        MAX_FEATURES
                    )));
                }
            }
            let cells = cells as u64;
            if offset.checked_add(cells).is_none_or(|t| t > MAX_FEATURES) {
                return Err(Error::capacity(format!(
                    "feature count exceeds the {MAX_FEATURES} cap"
                )));
            }
            blocks.push(IndicatorBlock {
                string: p.clone(),
                params,
                offset,
                cells,
            });
            offset += cells;
        }
        Ok(IndicatorMap {
            blocks,
            grid,
            delta1,
            num_params: ham.num_params(),
            m_phi: offset,
            _marker: std::marker::PhantomData,
        })
    }

    /// Total feature count.
    pub fn num_features(&self) -> u64 {
        self.m_phi
    }

    pub fn blocks(&self) -> &[IndicatorBlock] {
        &self.blocks
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn delta1(&self) -> usize {
        self.delta1
    }

    /// Sparse feature vector of centered coordinates `z ∈ [-1, 1]^m`:
    /// exactly one `(index, 1)` pair per block, indices ascending.
    pub fn features(&self, z: &[F]) -> Result<Vec<(u64, F)>> {
        if z.len() != self.num_params {
            return Err(Error::arg(format!(
                "coordinate vector has {} entries, map expects {}",
                z.len(),
                self.num_params
            )));
        }
        let ppa = self.grid.points_per_axis();
        let mut out = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            // mixed-radix encoding, first window axis least significant
            let mut idx: u64 = 0;
            let mut scale: u64 = 1;
            for &p in &block.params {
                idx += self.grid.cell_of(z[p])? * scale;
                scale = scale.saturating_mul(ppa);
            }
            out.push((block.offset + idx, F::one()));
        }
        Ok(out)
    }

    /// Map a feature index back to its block and per-axis cells.
    pub fn decode_feature(&self, index: u64) -> Result<(&IndicatorBlock, Vec<u64>)> {
        let pos = self
            .blocks
            .partition_point(|b| b.offset + b.cells <= index);
        let block = self
            .blocks
            .get(pos)
            .filter(|b| index >= b.offset)
            .ok_or_else(|| Error::arg(format!("feature index {index} out of range")))?;
        let ppa = self.grid.points_per_axis();
        let mut local = index - block.offset;
        let mut cells = Vec::with_capacity(block.params.len());
        for _ in &block.params {
            cells.push(local % ppa);
            local /= ppa;
        }
        Ok((block, cells))
    }

    /// Short hex digest of everything defining the feature space.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Spec<'a> {
            kind: &'static str,
            delta1: usize,
            delta2_inv: u64,
            num_params: usize,
            blocks: Vec<(String, &'a [usize])>,
        }
        let spec = Spec {
            kind: "indicator",
            delta1: self.delta1,
            delta2_inv: self.grid.delta2_inv,
            num_params: self.num_params,
            blocks: self
                .blocks
                .iter()
                .map(|b| (b.string.to_string(), b.params.as_slice()))
                .collect(),
        };
        digest_spec(&spec)
    }
}

/// One window of an [`RffMap`]: nearby couplings plus Gaussian directions.
#[derive(Debug, Clone)]
pub struct RffRegion<F: Scalar> {
    params: Vec<usize>,
    /// `r_max` rows of `params.len()` Gaussian draws.
    omegas: Vec<Vec<F>>,
}

impl<F: Scalar> RffRegion<F> {
    pub fn params(&self) -> &[usize] {
        &self.params
    }
}

/// Random Fourier features on per-term coupling windows.
///
/// Directions are drawn once at build time (`r_max` rows per region, fixed
/// by `seed`); evaluation picks the first `r ≤ r_max` rows, so feature sets
/// at smaller `r` are exact prefixes row-wise. Each feature pair is
/// `(cos(γ u)/√r, sin(γ u)/√r)` with `u = ω·z/√l` the normalized window
/// projection, making region blocks unit-norm and their inner products
/// Monte-Carlo estimates of a Gaussian kernel of width `l/γ²`.
#[derive(Debug, Clone)]
pub struct RffMap<F: Scalar> {
    regions: Vec<RffRegion<F>>,
    r_max: usize,
    delta1: usize,
    seed: u64,
    num_params: usize,
}

impl<F: Scalar> RffMap<F> {
    pub fn build(
        ham: &ParamHamiltonian<F>,
        delta1: usize,
        r_max: usize,
        seed: u64,
    ) -> Result<Self> {
        if r_max == 0 {
            return Err(Error::arg("need at least one direction per region"));
        }
        let mut regions = Vec::with_capacity(ham.terms().len());
        for (t, term) in ham.terms().iter().enumerate() {
            let params = nearby_params(ham, term.sites(), delta1)?;
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, t as u64));
            let omegas = (0..r_max)
                .map(|_| {
                    params
                        .iter()
                        .map(|_| fp::<F>(StandardNormal.sample(&mut rng)))
                        .collect()
                })
                .collect();
            regions.push(RffRegion { params, omegas });
        }
        if regions.is_empty() {
            return Err(Error::arg("Hamiltonian family has no terms"));
        }
        let total = 2u128 * r_max as u128 * regions.len() as u128;
        if total > MAX_FEATURES as u128 {
            return Err(Error::capacity(format!(
                "feature count {total} exceeds the {MAX_FEATURES} cap"
            )));
        }
        Ok(RffMap {
            regions,
            r_max,
            delta1,
            seed,
            num_params: ham.num_params(),
        })
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    pub fn delta1(&self) -> usize {
        self.delta1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn regions(&self) -> &[RffRegion<F>] {
        &self.regions
    }

    pub fn num_features(&self, r: usize) -> Result<usize> {
        self.check_r(r)?;
        Ok(2 * r * self.regions.len())
    }

    fn check_r(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.r_max {
            return Err(Error::arg(format!(
                "direction count {r} outside 1..={}",
                self.r_max
            )));
        }
        Ok(())
    }

    /// Normalized window projections `ω_i·z/√l`, one row per direction per
    /// region. Independent of `r` and γ, so they can be computed once per
    /// sample and reused across a hyperparameter grid.
    pub fn projections(&self, z: &[F]) -> Result<Vec<Vec<F>>> {
        if z.len() != self.num_params {
            return Err(Error::arg(format!(
                "coordinate vector has {} entries, map expects {}",
                z.len(),
                self.num_params
            )));
        }
        for &v in z {
            let q = v.to_f64().unwrap_or(f64::NAN);
            if !q.is_finite() || q.abs() > 1.0 + DOMAIN_SLACK {
                return Err(Error::arg(format!(
                    "coordinate {q} outside the feature domain [-1, 1]"
                )));
            }
        }
        let mut out = Vec::with_capacity(self.regions.len());
        for region in &self.regions {
            let inv_sqrt_l = F::one() / fp::<F>(region.params.len() as f64).sqrt();
            let rows = region
                .omegas
                .iter()
                .map(|row| {
                    let mut acc = F::zero();
                    for (w, &p) in row.iter().zip(&region.params) {
                        acc += *w * z[p];
                    }
                    acc * inv_sqrt_l
                })
                .collect();
            out.push(rows);
        }
        Ok(out)
    }

    /// Dense feature vector at direction count `r` and kernel scale `gamma`.
    pub fn features(&self, z: &[F], r: usize, gamma: F) -> Result<Vec<F>> {
        let projections = self.projections(z)?;
        self.features_from_projections(&projections, r, gamma)
    }

    /// Rebuild features from cached [`Self::projections`] output.
    pub fn features_from_projections(
        &self,
        projections: &[Vec<F>],
        r: usize,
        gamma: F,
    ) -> Result<Vec<F>> {
        self.check_r(r)?;
        if projections.len() != self.regions.len() {
            return Err(Error::arg(format!(
                "{} projection rows for {} regions",
                projections.len(),
                self.regions.len()
            )));
        }
        let inv_sqrt_r = F::one() / fp::<F>(r as f64).sqrt();
        let mut out = Vec::with_capacity(2 * r * self.regions.len());
        for rows in projections {
            if rows.len() < r {
                return Err(Error::arg(format!(
                    "projection row count {} below requested {r}",
                    rows.len()
                )));
            }
            for &u in &rows[..r] {
                let t = gamma * u;
                out.push(t.cos() * inv_sqrt_r);
                out.push(t.sin() * inv_sqrt_r);
            }
        }
        Ok(out)
    }

    /// Map a dense feature index at direction count `r` back to
    /// `(region, direction row, sine?)`.
    pub fn feature_origin(&self, index: usize, r: usize) -> Result<(usize, usize, bool)> {
        self.check_r(r)?;
        let per_region = 2 * r;
        let region = index / per_region;
        if region >= self.regions.len() {
            return Err(Error::arg(format!("feature index {index} out of range")));
        }
        let within = index % per_region;
        Ok((region, within / 2, within % 2 == 1))
    }

    /// Short hex digest of everything defining the feature space.
    ///
    /// The direction count `r` is an evaluation-time choice and is *not*
    /// part of the digest; datasets carry it separately.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Spec<'a> {
            kind: &'static str,
            delta1: usize,
            r_max: usize,
            seed: u64,
            num_params: usize,
            regions: Vec<&'a [usize]>,
        }
        let spec = Spec {
            kind: "rff",
            delta1: self.delta1,
            r_max: self.r_max,
            seed: self.seed,
            num_params: self.num_params,
            regions: self.regions.iter().map(|r| r.params.as_slice()).collect(),
        };
        digest_spec(&spec)
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step on the pair
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn digest_spec<S: Serialize>(spec: &S) -> String {
    let json = serde_json::to_vec(spec).expect("spec serializes");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{enumerate_geo_paulis, Lattice, PauliOp};
    use crate::hamiltonian::{ParamHamiltonian, TermNormalization};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn chain_ham(n: usize) -> ParamHamiltonian<f64> {
        let lat = Lattice::chain(n).unwrap();
        ParamHamiltonian::heisenberg(&lat, TermNormalization::Raw).unwrap()
    }

    #[test]
    fn grid_cell_assignment() {
        let grid = GridSpec::new(2).unwrap(); // δ = 1/2, points {-1,-1/2,0,1/2,1}
        assert_eq!(grid.points_per_axis(), 5);
        let cases = [
            (-1.0, 0),
            (-0.75, 3 - 2), // midpoint goes to the upper grid point
            (-0.6, 1),
            (-0.2, 2),
            (0.0, 2),
            (0.2, 2),
            (0.6, 3),
            (0.75, 4), // midpoint goes up
            (1.0, 4),
        ];
        for (q, cell) in cases {
            assert_eq!(grid.cell_of::<f64>(q).unwrap(), cell, "coordinate {q}");
        }
        assert!(grid.cell_of::<f64>(1.5).is_err());
        assert_relative_eq!(grid.grid_value::<f64>(0).unwrap(), -1.0);
        assert_relative_eq!(grid.grid_value::<f64>(4).unwrap(), 1.0);
        assert_relative_eq!(grid.grid_value::<f64>(3).unwrap(), 0.5);
        assert!(grid.grid_value::<f64>(5).is_err());
    }

    #[test]
    fn coupling_windows_respect_distance() {
        let ham = chain_ham(5); // edges (0,1),(1,2),(2,3),(3,4)
        assert_eq!(nearby_params(&ham, &[2], 0).unwrap(), vec![1, 2]);
        assert_eq!(nearby_params(&ham, &[2], 1).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(nearby_params(&ham, &[0], 0).unwrap(), vec![0]);
        assert_eq!(nearby_params(&ham, &[0], 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn indicator_block_sizes() {
        let ham = chain_ham(2);
        let family = enumerate_geo_paulis(ham.lattice(), ham.range()).unwrap();
        assert_eq!(family.len(), 15);
        let map = IndicatorMap::build(&ham, &family, 0, GridSpec::new(2).unwrap()).unwrap();
        // two sites, one edge: every window is the single coupling
        for block in map.blocks() {
            assert_eq!(block.params(), &[0]);
            assert_eq!(block.cells(), 5);
        }
        assert_eq!(map.num_features(), 75);

        let ham5 = chain_ham(5);
        let z2 = crate::geometry::PauliString::single(2, PauliOp::Z);
        let map5 =
            IndicatorMap::build(&ham5, &[z2], 1, GridSpec::new(2).unwrap()).unwrap();
        assert_eq!(map5.num_features(), 625); // 5^4 cells over a 4-coupling window
    }

    #[test]
    fn indicator_features_are_one_hot_per_block() {
        let ham = chain_ham(4);
        let family = enumerate_geo_paulis(ham.lattice(), ham.range()).unwrap();
        let map = IndicatorMap::build(&ham, &family, 1, GridSpec::new(4).unwrap()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..200 {
            let z: Vec<f64> = (0..ham.num_params())
                .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
                .collect();
            let feats = map.features(&z).unwrap();
            assert_eq!(feats.len(), map.blocks().len());
            for (pair, block) in feats.iter().zip(map.blocks()) {
                assert!(pair.0 >= block.offset());
                assert!(pair.0 < block.offset() + block.cells());
                assert_eq!(pair.1, 1.0);
                // decoded grid point is within half a cell of the input
                let (b, cells) = map.decode_feature(pair.0).unwrap();
                assert_eq!(b.offset(), block.offset());
                for (&cell, &p) in cells.iter().zip(b.params()) {
                    let g: f64 = map.grid().grid_value(cell).unwrap();
                    assert!(
                        (g - z[p]).abs() <= map.grid().delta2::<f64>() / 2.0 + 1e-12,
                        "grid point {g} vs coordinate {}",
                        z[p]
                    );
                }
            }
        }
    }

    #[test]
    fn indicator_capacity_cap_enforced() {
        let ham = chain_ham(5);
        let z2 = crate::geometry::PauliString::single(2, PauliOp::Z);
        // window of 4 couplings at 8193 points per axis overflows 2^48
        let err = IndicatorMap::build(&ham, &[z2], 1, GridSpec::new(4096).unwrap());
        assert!(matches!(err, Err(Error::Capacity(_))));
    }

    #[test]
    fn centered_coordinates_shift() {
        let z = centered_coordinates(&[0.0f64, 1.0, 2.0]);
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn rff_prefix_property() {
        let ham = chain_ham(4);
        let big = RffMap::<f64>::build(&ham, 1, 8, 42).unwrap();
        let small = RffMap::<f64>::build(&ham, 1, 4, 42).unwrap();
        let z: Vec<f64> = vec![0.3, -0.5, 0.9];
        let from_big = big.features(&z, 4, 0.6).unwrap();
        let from_small = small.features(&z, 4, 0.6).unwrap();
        assert_eq!(from_big, from_small);
        assert_eq!(big.num_features(4).unwrap(), from_big.len());
        assert!(big.features(&z, 9, 0.6).is_err());
    }

    #[test]
    fn rff_projection_cache_matches_direct() {
        let ham = chain_ham(5);
        let map = RffMap::<f64>::build(&ham, 1, 6, 7).unwrap();
        let z = vec![0.1, -0.9, 0.4, 0.8];
        let projections = map.projections(&z).unwrap();
        for r in [1usize, 3, 6] {
            for gamma in [0.4, 0.75] {
                let direct = map.features(&z, r, gamma).unwrap();
                let cached = map
                    .features_from_projections(&projections, r, gamma)
                    .unwrap();
                assert_eq!(direct, cached);
            }
        }
    }

    #[test]
    fn rff_blocks_are_unit_norm() {
        let ham = chain_ham(3);
        let map = RffMap::<f64>::build(&ham, 0, 5, 1).unwrap();
        let z = vec![0.2, -0.7];
        let feats = map.features(&z, 5, 0.65).unwrap();
        // cos² + sin² = 1 per direction, scaled by 1/r: each region block has norm 1
        let per_region = 2 * 5;
        for chunk in feats.chunks(per_region) {
            let norm_sq: f64 = chunk.iter().map(|v| v * v).sum();
            assert_relative_eq!(norm_sq, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rff_inner_product_approximates_gaussian_kernel() {
        // single-coupling window: dot of feature blocks estimates exp(-γ²(x-y)²/2)
        let ham = chain_ham(2);
        let map = RffMap::<f64>::build(&ham, 0, 4000, 91).unwrap();
        let gamma = 0.75;
        for (x, y) in [(0.4, -0.2), (0.9, 0.7), (-1.0, 1.0)] {
            let fx = map.features(&[x], 4000, gamma).unwrap();
            let fy = map.features(&[y], 4000, gamma).unwrap();
            let dot: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
            let truth = (-gamma * gamma * (x - y) * (x - y) / 2.0).exp();
            assert!(
                (dot - truth).abs() < 0.05,
                "kernel estimate {dot} vs {truth} at ({x},{y})"
            );
        }
    }

    #[test]
    fn rff_determinism_and_seed_sensitivity() {
        let ham = chain_ham(3);
        let a = RffMap::<f64>::build(&ham, 1, 5, 3).unwrap();
        let b = RffMap::<f64>::build(&ham, 1, 5, 3).unwrap();
        let c = RffMap::<f64>::build(&ham, 1, 5, 4).unwrap();
        let z = vec![0.5, -0.5];
        assert_eq!(
            a.features(&z, 5, 0.5).unwrap(),
            b.features(&z, 5, 0.5).unwrap()
        );
        assert_ne!(
            a.features(&z, 5, 0.5).unwrap(),
            c.features(&z, 5, 0.5).unwrap()
        );
    }

    #[test]
    fn fingerprints_separate_configurations() {
        let ham = chain_ham(4);
        let family = enumerate_geo_paulis(ham.lattice(), ham.range()).unwrap();
        let g = GridSpec::new(2).unwrap();
        let a = IndicatorMap::<f64>::build(&ham, &family, 0, g).unwrap();
        let b = IndicatorMap::<f64>::build(&ham, &family, 1, g).unwrap();
        let c =
            IndicatorMap::<f64>::build(&ham, &family, 0, GridSpec::new(4).unwrap()).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(
            a.fingerprint(),
            IndicatorMap::<f64>::build(&ham, &family, 0, g).unwrap().fingerprint()
        );
        let r1 = RffMap::<f64>::build(&ham, 1, 5, 3).unwrap();
        let r2 = RffMap::<f64>::build(&ham, 1, 5, 4).unwrap();
        assert_ne!(r1.fingerprint(), r2.fingerprint());
    }

    #[test]
    fn domain_validation() {
        let ham = chain_ham(3);
        let family = enumerate_geo_paulis(ham.lattice(), ham.range()).unwrap();
        let map = IndicatorMap::build(&ham, &family, 0, GridSpec::new(2).unwrap()).unwrap();
        assert!(map.features(&[0.0, 1.5]).is_err());
        assert!(map.features(&[0.0]).is_err());
        let rff = RffMap::<f64>::build(&ham, 0, 3, 1).unwrap();
        assert!(rff.features(&[0.0, -1.5], 3, 0.5).is_err());
    }
}
