//! Small dense factorizations shared by the filter and the gap interpolator.

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::error::{Error, Result};

const FILTER_JITTER: f64 = 1e-9;
const FILTER_JITTER_DOUBLINGS: u32 = 5;

/// Lower-triangular `L` with `L Lᵀ = P` for a positive *semi*-definite `P`.
///
/// Zero pivots produce zero columns instead of failing, so a zero covariance
/// yields a zero square root. Returns `None` when `P` is not PSD.
fn semidefinite_cholesky<const N: usize>(p: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let diag = p[(j, j)];
        if !diag.is_finite() {
            return None;
        }
        let mut d = diag;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let tol = 1e-13 * diag.abs();
        if d > tol {
            let root = d.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..N {
                let mut r = p[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = r / root;
            }
        } else if d >= -tol {
            // zero pivot: the remaining column must vanish for P to be PSD
            for i in (j + 1)..N {
                let mut r = p[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                let bound = 1e-7 * (p[(i, i)].abs() * diag.abs()).sqrt() + 1e-300;
                if r.abs() > bound {
                    return None;
                }
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// Square root of a covariance, retrying with `1e-9·I` jitter doubled up to
/// five times before giving up.
pub fn covariance_sqrt<const N: usize>(p: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if let Some(l) = semidefinite_cholesky(p) {
        return Ok(l);
    }
    let mut jitter = FILTER_JITTER;
    for _ in 0..=FILTER_JITTER_DOUBLINGS {
        let shifted = p + SMatrix::<f64, N, N>::identity() * jitter;
        if let Some(l) = semidefinite_cholesky(&shifted) {
            log::debug!("covariance square root needed jitter {jitter:e}");
            return Ok(l);
        }
        jitter *= 2.0;
    }
    Err(Error::Numerical(format!(
        "covariance is not positive semi-definite (jitter up to {:e} failed)",
        jitter / 2.0
    )))
}

pub fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Solves `A x = b` for symmetric positive-definite `A`, escalating diagonal
/// jitter from `1e-9` to `1e-5` by decades when the factorization fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let n = a.nrows();
    let mut jitter = 1e-9;
    while jitter <= 1e-5 * (1.0 + 1e-9) {
        let shifted = a + DMatrix::<f64>::identity(n, n) * jitter;
        if let Some(chol) = shifted.cholesky() {
            log::debug!("kernel solve needed jitter {jitter:e}");
            return Ok(chol.solve(b));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(
        "kernel matrix is singular even with 1e-5 jitter".into(),
    ))
}
