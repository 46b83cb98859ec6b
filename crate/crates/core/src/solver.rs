//! Hermitian eigensolvers: dense for small blocks, restarted Lanczos with
//! deflation for larger matrix-free operators.
//!
//! The Lanczos path extracts a degenerate ground multiplet by repeated
//! deflation: once an eigenvector converges it is projected out and the
//! iteration runs again in the orthogonal complement, which recovers
//! degenerate partners plain Krylov iteration cannot see.

use faer::Side;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::pauli::AssembledOperator;
use crate::scalar::{fp, Scalar};

/// Accurate dense Hermitian eigendecomposition (computed in f64).
///
/// Returns eigenvalues in ascending order with matching eigenvectors.
fn hermitian_eigen<F: Scalar>(
    m: &DMatrix<Complex<F>>,
) -> Result<(Vec<F>, Vec<DVector<Complex<F>>>)> {
    let d = m.nrows();
    let a = faer::Mat::<faer::c64>::from_fn(d, d, |i, j| {
        let v = m[(i, j)];
        faer::c64::new(
            v.re.to_f64().unwrap_or(f64::NAN),
            v.im.to_f64().unwrap_or(f64::NAN),
        )
    });
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(format!("dense eigensolve failed: {e:?}")))?;
    let vals = (0..d).map(|i| fp::<F>(eig.S()[i].re)).collect();
    let vecs = (0..d)
        .map(|c| {
            DVector::from_fn(d, |r, _| {
                let u = eig.U()[(r, c)];
                Complex::new(fp::<F>(u.re), fp::<F>(u.im))
            })
        })
        .collect();
    Ok((vals, vecs))
}

/// Eigenvalues only, ascending (computed in f64).
fn hermitian_eigenvalues<F: Scalar>(m: &DMatrix<Complex<F>>) -> Result<Vec<F>> {
    let d = m.nrows();
    let a = faer::Mat::<faer::c64>::from_fn(d, d, |i, j| {
        let v = m[(i, j)];
        faer::c64::new(
            v.re.to_f64().unwrap_or(f64::NAN),
            v.im.to_f64().unwrap_or(f64::NAN),
        )
    });
    let vals = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numeric(format!("dense eigensolve failed: {e:?}")))?;
    Ok(vals.into_iter().map(fp::<F>).collect())
}

/// Eigendecomposition of a small real symmetric matrix (computed in f64).
fn symmetric_eigen_small<F: Scalar>(tri: &DMatrix<F>) -> Result<(Vec<F>, DMatrix<F>)> {
    let k = tri.nrows();
    let a = faer::Mat::<f64>::from_fn(k, k, |i, j| tri[(i, j)].to_f64().unwrap_or(f64::NAN));
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(format!("projected eigensolve failed: {e:?}")))?;
    let vals = (0..k).map(|i| fp::<F>(eig.S()[i])).collect();
    let vecs = DMatrix::from_fn(k, k, |r, c| fp::<F>(eig.U()[(r, c)]));
    Ok((vals, vecs))
}

/// Orthonormal basis of the lowest eigenspace plus the gap above it.
pub(crate) struct GroundSpace<F: Scalar> {
    pub energy: F,
    /// Second-lowest eigenvalue minus the lowest, counting multiplicity
    /// (zero when the ground space is degenerate).
    pub gap: F,
    pub basis: Vec<DVector<Complex<F>>>,
    /// Worst `||H v - E v||` over the returned basis.
    pub residual: F,
}

/// Largest multiplet the iterative path will collect before giving up.
const MULTIPLET_CAP: usize = 32;
/// Dimension at or below which the dense path is used outright.
const DENSE_CUTOFF: usize = 512;
/// Dense fallback limit when the iterative multiplet overflows.
const DENSE_FALLBACK: usize = 4096;

/// Ground eigenspace of an assembled operator.
///
/// `rel_tol` sets the degeneracy threshold: eigenvalues within
/// `rel_tol * max(1, |E0|)` of the bottom belong to the multiplet.
pub(crate) fn ground_space<F: Scalar>(
    op: &AssembledOperator<F>,
    rel_tol: F,
) -> Result<GroundSpace<F>> {
    if op.dim() <= DENSE_CUTOFF {
        return ground_space_dense(op, rel_tol);
    }
    match ground_space_lanczos(op, rel_tol) {
        Ok(gs) => Ok(gs),
        Err(Error::Numeric(_)) if op.dim() <= DENSE_FALLBACK => ground_space_dense(op, rel_tol),
        Err(e) => Err(e),
    }
}

/// (lowest, highest) eigenvalue of an assembled operator.
pub(crate) fn spectral_bounds<F: Scalar>(op: &AssembledOperator<F>) -> Result<(F, F)> {
    if op.dim() <= DENSE_CUTOFF {
        let vals = hermitian_eigenvalues(&op.dense()?)?;
        return Ok((vals[0], *vals.last().expect("nonempty spectrum")));
    }
    let scale = F::one().max(op.coeff_one_norm());
    let tol = fp::<F>(1e-10) * scale;
    let mut rng = ChaCha12Rng::seed_from_u64(0x6c6f775f65696721);
    let (lo, _) = lanczos_lowest(
        &|psi: &[Complex<F>], out: &mut [Complex<F>]| op.apply(psi, out),
        op.dim(),
        &[],
        &mut rng,
        tol,
    )?;
    let (neg_hi, _) = lanczos_lowest(
        &|psi: &[Complex<F>], out: &mut [Complex<F>]| {
            op.apply(psi, out);
            for v in out.iter_mut() {
                *v = -*v;
            }
        },
        op.dim(),
        &[],
        &mut rng,
        tol,
    )?;
    Ok((lo, -neg_hi))
}

/// Dense path: full eigendecomposition, multiplet selected by threshold.
pub(crate) fn ground_space_dense<F: Scalar>(
    op: &AssembledOperator<F>,
    rel_tol: F,
) -> Result<GroundSpace<F>> {
    let (vals, vecs) = hermitian_eigen(&op.dense()?)?;
    let e0 = vals[0];
    let threshold = e0 + rel_tol * F::one().max(e0.abs());
    let mut basis = Vec::new();
    let mut gap = F::zero();
    for (i, &v) in vals.iter().enumerate() {
        if v <= threshold {
            basis.push(vecs[i].clone());
        } else {
            gap = v - e0;
            break;
        }
    }
    let mut residual = F::zero();
    for b in &basis {
        let hv = op.apply_vec(b);
        let r = (&hv - b * Complex::new(e0, F::zero())).norm();
        residual = residual.max(r);
    }
    Ok(GroundSpace { energy: e0, gap, basis, residual })
}

/// Iterative path: lowest eigenpair, then deflation until the multiplet ends.
fn ground_space_lanczos<F: Scalar>(
    op: &AssembledOperator<F>,
    rel_tol: F,
) -> Result<GroundSpace<F>> {
    let scale = F::one().max(op.coeff_one_norm());
    let tol = fp::<F>(1e-11) * scale;
    let apply = |psi: &[Complex<F>], out: &mut [Complex<F>]| op.apply(psi, out);
    let mut rng = ChaCha12Rng::seed_from_u64(0x67726f756e642121);
    let (e0, v0) = lanczos_lowest(&apply, op.dim(), &[], &mut rng, tol)?;
    let threshold = e0 + rel_tol * F::one().max(e0.abs());
    let mut basis = vec![v0];
    let gap;
    loop {
        if basis.len() == op.dim() {
            gap = F::zero();
            break;
        }
        if basis.len() > MULTIPLET_CAP {
            return Err(Error::numeric(format!(
                "ground multiplet exceeds {MULTIPLET_CAP} vectors"
            )));
        }
        let (e, v) = lanczos_lowest(&apply, op.dim(), &basis, &mut rng, tol)?;
        if e <= threshold {
            basis.push(v);
        } else {
            gap = e - e0;
            break;
        }
    }
    let mut residual = F::zero();
    for b in &basis {
        let hv = op.apply_vec(b);
        let r = (&hv - b * Complex::new(e0, F::zero())).norm();
        residual = residual.max(r);
    }
    Ok(GroundSpace { energy: e0, gap, basis, residual })
}

fn cdot<F: Scalar>(a: &DVector<Complex<F>>, b: &DVector<Complex<F>>) -> Complex<F> {
    a.dotc(b)
}

/// Remove the projection of `v` onto each vector in `space` (assumed orthonormal).
fn project_out<F: Scalar>(v: &mut DVector<Complex<F>>, space: &[DVector<Complex<F>>]) {
    for d in space {
        let overlap = cdot(d, v);
        v.axpy(-overlap, d, Complex::new(F::one(), F::zero()));
    }
}

/// Lowest eigenpair of the operator restricted to the orthogonal complement
/// of `deflate`, via restarted Lanczos with full reorthogonalization.
fn lanczos_lowest<F: Scalar>(
    apply: &dyn Fn(&[Complex<F>], &mut [Complex<F>]),
    dim: usize,
    deflate: &[DVector<Complex<F>>],
    rng: &mut ChaCha12Rng,
    tol: F,
) -> Result<(F, DVector<Complex<F>>)> {
    let sub_dim = dim - deflate.len();
    if sub_dim == 0 {
        return Err(Error::numeric("deflation space exhausts the operator"));
    }
    let max_basis = sub_dim.min(48);
    let max_restarts = 60;
    let mut start = random_unit(dim, deflate, rng)?;
    let mut scratch = DVector::from_element(dim, Complex::new(F::zero(), F::zero()));

    for _ in 0..max_restarts {
        let mut q: Vec<DVector<Complex<F>>> = vec![start.clone()];
        let mut alphas: Vec<F> = Vec::new();
        let mut betas: Vec<F> = Vec::new();
        for j in 0..max_basis {
            apply(q[j].as_slice(), scratch.as_mut_slice());
            let mut w = scratch.clone();
            project_out(&mut w, deflate);
            let alpha = cdot(&q[j], &w).re;
            alphas.push(alpha);
            // full reorthogonalization against the Krylov basis, twice
            project_out(&mut w, &q);
            project_out(&mut w, &q);
            let beta = w.norm();
            if beta <= fp::<F>(1e-14) * F::one().max(tol) || j + 1 == max_basis {
                if j + 1 < max_basis {
                    // exact invariant subspace: the tridiagonal block is complete
                    break;
                }
                betas.push(beta);
                break;
            }
            betas.push(beta);
            q.push(w / Complex::new(beta, F::zero()));
        }
        let k = alphas.len();
        let mut tri = DMatrix::<F>::zeros(k, k);
        for i in 0..k {
            tri[(i, i)] = alphas[i];
            if i + 1 < k && i < betas.len() {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let (thetas, ritz) = symmetric_eigen_small(&tri)?;
        let theta = thetas[0];
        let mut u = DVector::from_element(dim, Complex::new(F::zero(), F::zero()));
        for (i, qi) in q.iter().enumerate().take(k) {
            u.axpy(
                Complex::new(ritz[(i, 0)], F::zero()),
                qi,
                Complex::new(F::one(), F::zero()),
            );
        }
        project_out(&mut u, deflate);
        let norm = u.norm();
        if norm <= fp::<F>(1e-14) {
            start = random_unit(dim, deflate, rng)?;
            continue;
        }
        u /= Complex::new(norm, F::zero());
        apply(u.as_slice(), scratch.as_mut_slice());
        let mut r = scratch.clone();
        project_out(&mut r, deflate);
        r.axpy(Complex::new(-theta, F::zero()), &u, Complex::new(F::one(), F::zero()));
        if r.norm() <= tol {
            return Ok((theta, u));
        }
        start = u;
    }
    Err(Error::numeric(format!(
        "Lanczos failed to reach tolerance {tol:?} in {max_restarts} restarts"
    )))
}

fn random_unit<F: Scalar>(
    dim: usize,
    deflate: &[DVector<Complex<F>>],
    rng: &mut ChaCha12Rng,
) -> Result<DVector<Complex<F>>> {
    for _ in 0..16 {
        let mut v = DVector::from_fn(dim, |_, _| {
            Complex::new(fp::<F>(rng.gen::<f64>() - 0.5), fp::<F>(rng.gen::<f64>() - 0.5))
        });
        project_out(&mut v, deflate);
        let n = v.norm();
        if n > fp::<F>(1e-8) {
            return Ok(v / Complex::new(n, F::zero()));
        }
    }
    Err(Error::numeric("could not draw a start vector outside the deflation space"))
}
