//! Small dense kernels shared by the structure, interval and sampler code.
//!
//! Matrices here are at most a few dozen rows, so everything is plain
//! `nalgebra::DMatrix` without blocking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default pivot threshold for positive-definiteness decisions.
pub const PD_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor, or `None` as soon as a pivot `d_k = L_kk^2` drops to `tol` or below.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky_with_threshold(m: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// True iff the symmetric factorization of `m` succeeds with every pivot above `tol`.
pub fn is_positive_definite(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    check_symmetric(m)?;
    Ok(cholesky_with_threshold(m, tol).is_some())
}

/// Determinant of a (possibly indefinite) square matrix via LU with partial pivoting.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// Principal submatrix selecting `idx` rows and columns, in the given order.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |r, _| v[idx[r]])
}

/// In-place lower Cholesky of a row-major `p x p` buffer; the strict upper triangle is zeroed.
///
/// Returns `false` if a pivot drops to `tol` or below, leaving `a` partially overwritten.
pub(crate) fn chol_flat(a: &mut [f64], p: usize, tol: f64) -> bool {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return false;
        }
        let ljj = d.sqrt();
        a[j * p + j] = ljj;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / ljj;
        }
        for k in (j + 1)..p {
            a[j * p + k] = 0.0;
        }
    }
    true
}

/// `log |A|` from the flat factor of [`chol_flat`].
pub(crate) fn chol_flat_logdet(l: &[f64], p: usize) -> f64 {
    2.0 * (0..p).map(|i| l[i * p + i].ln()).sum::<f64>()
}

/// Writes `(l l')^{-1}` into `out`, both row-major `p x p`; `work` needs `p * p` slots.
pub(crate) fn chol_flat_inverse(l: &[f64], p: usize, work: &mut [f64], out: &mut [f64]) {
    // work = l^{-1}, lower triangular
    work[..p * p].fill(0.0);
    for c in 0..p {
        work[c * p + c] = 1.0 / l[c * p + c];
        for i in (c + 1)..p {
            let mut s = 0.0;
            for k in c..i {
                s -= l[i * p + k] * work[k * p + c];
            }
            work[i * p + c] = s / l[i * p + i];
        }
    }
    // out = work' work
    for i in 0..p {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..p {
                s += work[k * p + i] * work[k * p + j];
            }
            out[i * p + j] = s;
            out[j * p + i] = s;
        }
    }
}
