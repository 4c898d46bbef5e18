//! Matrix norms: spectral (operator) norm by Lanczos iteration, Frobenius
//! norm and the maximum absolute row sum.

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, MatrixRef};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Largest singular value by Lanczos iteration with full reorthogonalization.
///
/// Symmetric input is iterated directly and the extreme Ritz value of largest
/// modulus is taken; any other input is iterated on `AᵀA`. A Ritz value `θ`
/// is accepted once its residual `β |s_m|` is at most `tol · |θ|`, which
/// bounds the distance from `θ` to an eigenvalue. If the Krylov space closes
/// early (the start vector lies in an invariant subspace), iteration resumes
/// from a fresh orthogonal vector and runs until the whole space is spanned,
/// so an unlucky start cannot hide the top of the spectrum.
///
/// `max_iter` caps the Krylov dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSolver {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectralSolver {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Result of a spectral-norm solve.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub norm: f64,
    /// Unit Ritz vector of the accepted value; usable as a warm start.
    pub vector: Vec<f64>,
    /// Krylov dimension reached.
    pub iterations: usize,
}

impl SpectralSolver {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::arg(format!("tol must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::arg("max_iter must be at least 1"));
        }
        Ok(Self { tol, max_iter })
    }

    pub fn norm<M: MatrixRef + ?Sized>(&self, a: &M) -> Result<f64> {
        self.estimate(a, None).map(|e| e.norm)
    }

    /// Starts from `start` when given (warm start), otherwise from the default
    /// start vector.
    pub fn estimate<M: MatrixRef + ?Sized>(
        &self,
        a: &M,
        start: Option<&[f64]>,
    ) -> Result<SpectralEstimate> {
        let n = a.ncols();
        if a.max_abs() == 0.0 {
            return Ok(SpectralEstimate {
                norm: 0.0,
                vector: unit(default_start(n)),
                iterations: 0,
            });
        }
        let first = match start {
            Some(s) if s.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: format!("start vector of length {n}"),
                    got: format!("{}", s.len()),
                })
            }
            Some(s) if s.iter().all(|v| v.is_finite()) && s.iter().any(|&v| v != 0.0) => s.to_vec(),
            _ => default_start(n),
        };
        self.lanczos(a, first)
    }

    fn lanczos<M: MatrixRef + ?Sized>(&self, a: &M, start: Vec<f64>) -> Result<SpectralEstimate> {
        let symmetric = a.is_symmetric();
        let n = a.ncols();
        let mut scratch = vec![0.0; a.nrows()];
        let mut apply = |x: &[f64], out: &mut [f64]| {
            if symmetric {
                a.mul_vec_into(x, out);
            } else {
                a.mul_vec_into(x, &mut scratch);
                a.tr_mul_vec_into(&scratch, out);
            }
        };

        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut q = unit(start);
        let mut w = vec![0.0; n];
        let mut scale = 0.0_f64;
        let mut closed = false;
        let mut fresh = 0usize;

        loop {
            apply(&q, &mut w);
            let mut a_j = dot(&w, &q);
            for (wi, qi) in w.iter_mut().zip(&q) {
                *wi -= a_j * qi;
            }
            if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
                for (wi, pi) in w.iter_mut().zip(prev) {
                    *wi -= b * pi;
                }
            }
            basis.push(q);
            // two passes of classical Gram–Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let correction = dot(&w, basis.last().expect("non-empty basis"));
            a_j += correction;
            alpha.push(a_j);
            let b = dot(&w, &w).sqrt();
            scale = scale.max(a_j.abs()).max(b);
            let m = basis.len();
            let breakdown = b <= 1e-13 * scale;
            closed |= breakdown && m < n;

            let (values, last_row) = tridiagonal_eigen(&alpha, &beta, false)?;
            let pick = pick_ritz(&values, symmetric);
            let theta = values[pick];
            let residual = b * last_row[0][pick].abs();
            let done = m == n || (!closed && residual <= self.tol * theta.abs());
            if done {
                let (_, vectors) = tridiagonal_eigen(&alpha, &beta, true)?;
                let mut y = vec![0.0; n];
                for (v, row) in basis.iter().zip(&vectors) {
                    let s = row[pick];
                    for (yi, vi) in y.iter_mut().zip(v) {
                        *yi += s * vi;
                    }
                }
                return Ok(SpectralEstimate {
                    norm: ritz_norm(theta, symmetric),
                    vector: unit(y),
                    iterations: m,
                });
            }
            if m >= self.max_iter {
                return Err(Error::NoConvergence {
                    iterations: m,
                    estimate: ritz_norm(theta, symmetric),
                });
            }

            if breakdown {
                q = loop {
                    let mut c = restart_vector(n, fresh);
                    fresh += 1;
                    for _ in 0..2 {
                        for v in &basis {
                            let d = dot(&c, v);
                            for (ci, vi) in c.iter_mut().zip(v) {
                                *ci -= d * vi;
                            }
                        }
                    }
                    if dot(&c, &c).sqrt() > 1e-8 {
                        break unit(c);
                    }
                };
                beta.push(0.0);
            } else {
                beta.push(b);
                q = w.iter().map(|v| v / b).collect();
            }
        }
    }
}

fn ritz_norm(theta: f64, symmetric: bool) -> f64 {
    if symmetric {
        theta.abs()
    } else {
        theta.max(0.0).sqrt()
    }
}

/// Index of the Ritz value that estimates the norm: largest modulus for
/// symmetric input, largest value for `AᵀA`.
fn pick_ritz(values: &[f64], symmetric: bool) -> usize {
    let key = |v: f64| if symmetric { v.abs() } else { v };
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if key(v) > key(values[best]) {
            best = i;
        }
    }
    best
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` by implicit QL with Wilkinson shifts, together with
/// either the last row of the eigenvector matrix (`full = false`) or all of
/// it (`full = true`). Entry `[r][j]` is component `r` of eigenvector `j`.
pub(crate) fn tridiagonal_eigen(d: &[f64], e: &[f64], full: bool) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = d.len();
    debug_assert_eq!(e.len() + 1, n);
    let mut d = d.to_vec();
    let mut off = vec![0.0; n];
    off[..n - 1].copy_from_slice(e);
    let mut z: Vec<Vec<f64>> = if full {
        (0..n)
            .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect()
    } else {
        vec![(0..n).map(|c| if c == n - 1 { 1.0 } else { 0.0 }).collect()]
    };
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNoConvergence { sweeps: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let t = row[i + 1];
                    row[i + 1] = s * row[i] + c * t;
                    row[i] = c * row[i] - s * t;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok((d, z))
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// All-ones with a fixed rational ripple, so structured (e.g. centrosymmetric)
/// matrices whose top singular vector is orthogonal to the all-ones vector
/// are still reached.
pub(crate) fn default_start(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + ((i * 7919) % 101) as f64 / 200.0)
        .collect()
}

/// Deterministic restart directions after the Krylov space closes: a
/// sign-alternating ripple first, then the unit vectors.
fn restart_vector(n: usize, attempt: usize) -> Vec<f64> {
    match attempt {
        0 => (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + ((i * 104_729) % 97) as f64 / 150.0)
            })
            .collect(),
        k => (0..n).map(|i| if i == (k - 1) % n { 1.0 } else { 0.0 }).collect(),
    }
}

fn unit(mut x: Vec<f64>) -> Vec<f64> {
    normalize(&mut x);
    x
}

/// Largest singular value of `a` (for symmetric input, the largest eigenvalue
/// modulus), to relative accuracy `tol`.
pub fn op_norm<M: MatrixRef + ?Sized>(a: &M, tol: f64, max_iter: usize) -> Result<f64> {
    SpectralSolver::new(tol, max_iter)?.norm(a)
}

/// [`op_norm`] with the default tolerance and iteration cap.
pub fn op_norm_default<M: MatrixRef + ?Sized>(a: &M) -> Result<f64> {
    SpectralSolver::default().norm(a)
}

pub fn frob_norm<M: MatrixRef + ?Sized>(a: &M) -> f64 {
    dot(a.as_slice(), a.as_slice()).sqrt()
}

/// `‖A‖₁,₁ = maxᵢ Σⱼ |aᵢⱼ|`.
pub fn max_abs_row_sum<M: MatrixRef + ?Sized>(a: &M) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, SymMatrix};

    #[test]
    fn trivial_norms() {
        assert!((op_norm_default(&SymMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-12);
        let swap = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((op_norm_default(&swap).unwrap() - 1.0).abs() < 1e-12);
        let d = SymMatrix::from_diag(&[1.0, -4.0, 2.0]);
        assert!((op_norm_default(&d).unwrap() - 4.0).abs() < 1e-7);
    }

    #[test]
    fn zero_matrix_is_exactly_zero() {
        assert_eq!(op_norm_default(&SymMatrix::zeros(4)).unwrap(), 0.0);
        assert_eq!(frob_norm(&SymMatrix::zeros(4)), 0.0);
    }

    #[test]
    fn start_orthogonal_to_top_eigenvector() {
        // all-ones is an eigenvector for eigenvalue -2; the norm is 4
        let a = SymMatrix::from_rows(&[vec![1.0, -3.0], vec![-3.0, 1.0]]).unwrap();
        assert!((op_norm_default(&a).unwrap() - 4.0).abs() < 1e-7);
        // centrosymmetric 3x3 with an off-span top eigenvector
        let b = SymMatrix::from_rows(&[
            vec![1.0, 0.0, -3.0],
            vec![0.0, 3.0, 0.0],
            vec![-3.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((op_norm_default(&b).unwrap() - 4.0).abs() < 1e-7);
    }

    #[test]
    fn null_start_is_retried() {
        let a = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let est = SpectralSolver::default()
            .estimate(&a, Some(&[1.0, 1.0]))
            .unwrap();
        assert!((est.norm - 2.0).abs() < 1e-7);
    }

    #[test]
    fn rectangular_matches_known_singular_value() {
        // singular values of [[3,0],[4,5]] are sqrt(45) and sqrt(5)
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]).unwrap();
        assert!((op_norm_default(&a).unwrap() - 45f64.sqrt()).abs() < 1e-7);
        let wide = DenseMatrix::from_rows(&[vec![1.0, 2.0, 2.0]]).unwrap();
        assert!((op_norm_default(&wide).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let a = SymMatrix::from_rows(&[
            vec![1.0, 0.3, 0.0],
            vec![0.3, 0.9, 0.2],
            vec![0.0, 0.2, 0.95],
        ])
        .unwrap();
        match op_norm(&a, 1e-15, 1) {
            Err(Error::NoConvergence { iterations, estimate }) => {
                assert_eq!(iterations, 1);
                assert!(estimate > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn nearly_degenerate_top_pair() {
        // singular values 10 and 10(1 − 1e-9) defeat plain power iteration
        let d = SymMatrix::from_diag(&[3.0, 10.0, -10.0 * (1.0 - 1e-9), 1.0, 0.5]);
        assert!((op_norm_default(&d).unwrap() - 10.0).abs() < 1e-7);
        let g = DenseMatrix::from_rows(&[
            vec![10.0, 0.0, 0.0],
            vec![0.0, 0.0, 9.999_999_99],
            vec![0.0, 2.0, 0.0],
        ])
        .unwrap();
        assert!((op_norm_default(&g).unwrap() - 10.0).abs() < 1e-7);
    }

    #[test]
    fn identity_needs_the_whole_space() {
        let est = SpectralSolver::default().estimate(&SymMatrix::identity(6), None).unwrap();
        assert!((est.norm - 1.0).abs() < 1e-12);
        assert_eq!(est.iterations, 6);
    }

    #[test]
    fn warm_start_vector_is_a_unit_ritz_vector() {
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let est = SpectralSolver::default().estimate(&a, None).unwrap();
        assert!((est.norm - 3.0).abs() < 1e-8);
        let v = &est.vector;
        assert!((dot(v, v) - 1.0).abs() < 1e-12);
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-6 && (v[0] - v[1]).abs() < 1e-6);
        // an exact eigenvector closes the Krylov space, so the rest is explored
        let again = SpectralSolver::default().estimate(&a, Some(v)).unwrap();
        assert!((again.norm - 3.0).abs() < 1e-8);
        let b = SymMatrix::from_rows(&[vec![1.0, -3.0], vec![-3.0, 1.0]]).unwrap();
        let trap = SpectralSolver::default().estimate(&b, Some(&[1.0, 1.0])).unwrap();
        assert!((trap.norm - 4.0).abs() < 1e-8);
    }

    #[test]
    fn tridiagonal_matches_dense_eigensolver() {
        let d = [4.0, -1.0, 2.5, 0.3, 7.0];
        let e = [1.0, 0.5, -2.0, 0.8];
        let (mut values, _) = tridiagonal_eigen(&d, &e, false).unwrap();
        values.sort_by(f64::total_cmp);
        let t = SymMatrix::from_upper_fn(5, |i, j| {
            if i == j {
                d[i]
            } else if j == i + 1 {
                e[i]
            } else {
                0.0
            }
        })
        .unwrap();
        let dense = crate::linalg::symmetric_eigen(&t).unwrap();
        for (a, b) in values.iter().zip(&dense.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // full vectors agree with the tracked last row and are orthonormal
        let (vals, full) = tridiagonal_eigen(&d, &e, true).unwrap();
        let (_, last) = tridiagonal_eigen(&d, &e, false).unwrap();
        for j in 0..5 {
            assert!((full[4][j] - last[0][j]).abs() < 1e-14);
            let col: Vec<f64> = (0..5).map(|r| full[r][j]).collect();
            assert!((dot(&col, &col) - 1.0).abs() < 1e-12);
            let tv = t.mul_vec(&col);
            for r in 0..5 {
                assert!((tv[r] - vals[j] * col[r]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = SymMatrix::identity(2);
        assert!(op_norm(&a, 0.0, 10).is_err());
        assert!(op_norm(&a, 1e-8, 0).is_err());
    }

    #[test]
    fn frobenius_and_row_sum() {
        assert!((frob_norm(&SymMatrix::identity(5)) - 5f64.sqrt()).abs() < 1e-15);
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!((frob_norm(&a) - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(max_abs_row_sum(&SymMatrix::identity(3)), 1.0);
        let b = SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 0.0]]).unwrap();
        assert_eq!(max_abs_row_sum(&b), 3.0);
    }
}
