//! Cholesky factorization and a cyclic Jacobi eigensolver for small
//! symmetric matrices.

use crate::error::{Error, Result};
use crate::linalg::matrix::{DenseMatrix, MatrixRef, SymMatrix};

/// Lower-triangular `L` with `L Lᵀ = Σ`.
pub fn cholesky(sigma: &SymMatrix) -> Result<DenseMatrix> {
    let p = sigma.dim();
    let mut l = DenseMatrix::zeros(p, p);
    let ld = l.data_mut();
    for j in 0..p {
        let mut d = sigma.get(j, j);
        for k in 0..j {
            d -= ld[j * p + k] * ld[j * p + k];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        let djj = d.sqrt();
        ld[j * p + j] = djj;
        for i in (j + 1)..p {
            let mut s = sigma.get(i, j);
            for k in 0..j {
                s -= ld[i * p + k] * ld[j * p + k];
            }
            ld[i * p + j] = s / djj;
        }
    }
    Ok(l)
}

/// `log det Σ` from the Cholesky factor.
pub fn log_det_pd(sigma: &SymMatrix) -> Result<f64> {
    let l = cholesky(sigma)?;
    Ok((0..sigma.dim()).map(|i| 2.0 * l.get(i, i).ln()).sum())
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations. Meant for the small (≲ 50) matrices the oracles
/// use; cost is `O(p³)` per sweep.
pub fn symmetric_eigen(a: &SymMatrix) -> Result<SymEigen> {
    let p = a.dim();
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let mut v = DenseMatrix::identity(p);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
            .map(|(i, j)| m[i * p + j] * m[i * p + j])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&x, &y| m[x * p + x].total_cmp(&m[y * p + y]));
            let values = order.iter().map(|&k| m[k * p + k]).collect();
            let vectors = DenseMatrix::from_fn(p, p, |i, c| v.get(i, order[c]))?;
            return Ok(SymEigen { values, vectors });
        }
        for r in 0..p {
            for c in (r + 1)..p {
                let arc = m[r * p + c];
                if arc == 0.0 {
                    continue;
                }
                let theta = (m[c * p + c] - m[r * p + r]) / (2.0 * arc);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..p {
                    let mkr = m[k * p + r];
                    let mkc = m[k * p + c];
                    m[k * p + r] = cs * mkr - sn * mkc;
                    m[k * p + c] = sn * mkr + cs * mkc;
                }
                for k in 0..p {
                    let mrk = m[r * p + k];
                    let mck = m[c * p + k];
                    m[r * p + k] = cs * mrk - sn * mck;
                    m[c * p + k] = sn * mrk + cs * mck;
                }
                let vd = v.data_mut();
                for k in 0..p {
                    let vkr = vd[k * p + r];
                    let vkc = vd[k * p + c];
                    vd[k * p + r] = cs * vkr - sn * vkc;
                    vd[k * p + c] = sn * vkr + cs * vkc;
                }
            }
        }
    }
    Err(Error::EigenNoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// Symmetric square root `Σ^{1/2}` of a positive semi-definite matrix.
pub fn sqrt_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = symmetric_eigen(a)?;
    let tol = 1e-12 * eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(&neg) = eig.values.iter().find(|&&v| v < -tol) {
        return Err(Error::arg(format!(
            "square root needs a positive semi-definite matrix, found eigenvalue {neg:e}"
        )));
    }
    let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let q = &eig.vectors;
    SymMatrix::from_upper_fn(a.dim(), |i, j| {
        (0..roots.len()).map(|k| q.get(i, k) * roots[k] * q.get(j, k)).sum()
    })
}
