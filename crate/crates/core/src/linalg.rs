//! Small dense linear-algebra helpers shared by the reduction pipelines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular value decomposition with singular values sorted in non-increasing
/// order and a deterministic sign convention: the largest-magnitude entry of
/// each left singular vector is positive (ties broken by lowest row index).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Full SVD of `m`, sorted and sign-fixed. Only the thin factors are returned
/// (`u`: rows x k, `v`: cols x k with k = min(rows, cols)).
pub fn sorted_svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence { what: "SVD" })?;
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;

    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).expect("finite singular values"));

    let mut u_s = DMatrix::zeros(u.nrows(), k);
    let mut v_s = DMatrix::zeros(vt.ncols(), k);
    let mut sig_s = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        sig_s[dst] = sigma[src];
        u_s.set_column(dst, &u.column(src));
        v_s.set_column(dst, &vt.row(src).transpose());
    }

    fix_column_signs(&mut u_s, Some(&mut v_s));
    Ok(SortedSvd {
        u: u_s,
        sigma: sig_s,
        v: v_s,
    })
}

/// Flips column signs so the largest-magnitude entry of each column of `m` is
/// positive. When `paired` is given, its matching column is flipped too, so a
/// product like U * S * V^T is preserved.
pub fn fix_column_signs(m: &mut DMatrix<f64>, paired: Option<&mut DMatrix<f64>>) {
    let mut flip = vec![false; m.ncols()];
    for (j, col) in m.column_iter().enumerate() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, &x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        flip[j] = col[best] < 0.0;
    }
    for (j, &f) in flip.iter().enumerate() {
        if f {
            m.column_mut(j).neg_mut();
        }
    }
    if let Some(p) = paired {
        for (j, &f) in flip.iter().enumerate() {
            if f {
                p.column_mut(j).neg_mut();
            }
        }
    }
}

/// Spectral radius of a square matrix: dense eigenvalue solve up to
/// `DENSE_EIG_LIMIT`, power iteration beyond that.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    assert!(a.is_square(), "spectral radius of a non-square matrix");
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    if a.nrows() <= DENSE_EIG_LIMIT {
        let eigs = a.clone().complex_eigenvalues();
        Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
    } else {
        power_iteration_radius(a)
    }
}

/// Threshold up to which the spectral radius uses a dense eigenvalue solve.
pub const DENSE_EIG_LIMIT: usize = 2000;

/// Power iteration on A^T A pairs would estimate the 2-norm, not the spectral
/// radius, so this iterates x <- Ax with normalization and takes the growth
/// rate once it settles to 1e-10 relative change.
fn power_iteration_radius(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_749_895).fract());
    x /= x.norm();
    let mut rho = 0.0f64;
    for _ in 0..100_000 {
        let y = a * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = norm;
        x = y / norm;
        if (next - rho).abs() <= 1e-10 * next.max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        rho = next;
    }
    Err(Error::NoConvergence {
        what: "power iteration",
    })
}

/// Symmetric positive-semidefinite square-root factor: returns `L` with
/// `L L^T = 0.5 (W + W^T)`, clipping eigenvalues below `-tol * trace` is an
/// error and smaller negatives are treated as zero.
pub fn psd_factor(w: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let sym = 0.5 * (w + w.transpose());
    let trace = sym.trace().abs().max(f64::MIN_POSITIVE);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut l = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol * trace {
            return Err(Error::InvalidArgument(format!(
                "matrix is not positive semidefinite: eigenvalue {lambda:e}"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    Ok(l)
}

/// Largest entry magnitude.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Max entrywise difference relative to the larger of the two matrices'
/// largest entry magnitudes (floored at 1 for near-zero matrices).
#[cfg(test)]
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rel_diff shape mismatch");
    let scale = max_abs(a).max(max_abs(b)).max(1e-300);
    let diff = a - b;
    max_abs(&diff) / scale
}
