//! Population covariance models and the point estimators: sample
//! covariance, banding and tapering.

use crate::error::{Error, Result};
use crate::linalg::{band, cholesky, DenseMatrix, MatrixRef, SymMatrix};

/// `n × p` data matrix, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    inner: DenseMatrix,
}

impl DataSample {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        Ok(Self {
            inner: DenseMatrix::from_row_major(n, p, data)?,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self {
            inner: DenseMatrix::from_rows(rows)?,
        })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn p(&self) -> usize {
        self.inner.ncols()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.inner.row(k)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    /// Sub-sample made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataSample> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::arg(format!("row {bad} out of range (n = {})", self.n())));
        }
        let mut data = Vec::with_capacity(rows.len() * self.p());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DataSample::new(rows.len(), self.p(), data)
    }
}

/// `σ̂_ij = (n−1)⁻¹ Σ_k (X_ki − X̄_i)(X_kj − X̄_j)`.
pub fn sample_cov(x: &DataSample) -> Result<SymMatrix> {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return Err(Error::arg(format!("sample covariance needs n >= 2, got {n}")));
    }
    let mut mean = vec![0.0; p];
    for k in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(k)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut acc = vec![0.0; p * p];
    let mut c = vec![0.0; p];
    for k in 0..n {
        for ((ci, v), m) in c.iter_mut().zip(x.row(k)).zip(&mean) {
            *ci = v - m;
        }
        for i in 0..p {
            let ci = c[i];
            if ci == 0.0 {
                continue;
            }
            for (a, cj) in acc[i * p + i..(i + 1) * p].iter_mut().zip(&c[i..]) {
                *a += ci * cj;
            }
        }
    }
    let denom = (n - 1) as f64;
    SymMatrix::from_upper_fn(p, |i, j| acc[i * p + j] / denom)
}

/// Sample covariance banded at bandwidth `K`.
pub fn banding_estimator(x: &DataSample, bandwidth: usize) -> Result<SymMatrix> {
    if bandwidth < 1 {
        return Err(Error::arg("bandwidth must be at least 1"));
    }
    band(&sample_cov(x)?, bandwidth)
}

/// Trapezoidal taper weight for lag `m` at even bandwidth `K`:
/// 1 up to `K/2`, linear down to 0 at `K`, 0 beyond.
pub fn taper_weight(lag: usize, bandwidth: usize) -> f64 {
    let half = bandwidth / 2;
    if lag <= half {
        1.0
    } else if lag < bandwidth {
        2.0 - 2.0 * lag as f64 / bandwidth as f64
    } else {
        0.0
    }
}

pub(crate) fn check_taper_bandwidth(bandwidth: usize) -> Result<()> {
    if bandwidth < 2 || bandwidth % 2 != 0 {
        return Err(Error::arg(format!(
            "tapering bandwidth must be an even integer >= 2, got {bandwidth}"
        )));
    }
    Ok(())
}

/// Applies the taper weights of bandwidth `K` to a covariance estimate.
pub fn taper(s: &SymMatrix, bandwidth: usize) -> Result<SymMatrix> {
    check_taper_bandwidth(bandwidth)?;
    Ok(s.map_upper(|i, j, v| {
        let w = taper_weight(j - i, bandwidth);
        if w == 1.0 {
            v
        } else {
            w * v
        }
    }))
}

pub fn tapering_estimator(x: &DataSample, bandwidth: usize) -> Result<SymMatrix> {
    check_taper_bandwidth(bandwidth)?;
    taper(&sample_cov(x)?, bandwidth)
}

/// Power-law decaying covariance `σ_ij = ρ |i − j|^{−(α+1)}` off the
/// diagonal, with a constant diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationModel {
    pub p: usize,
    pub rho: f64,
    pub alpha: f64,
    pub diagonal: f64,
}

impl PopulationModel {
    /// Model with unit diagonal.
    pub fn new(p: usize, rho: f64, alpha: f64) -> Self {
        Self {
            p,
            rho,
            alpha,
            diagonal: 1.0,
        }
    }

    pub fn with_diagonal(mut self, diagonal: f64) -> Self {
        self.diagonal = diagonal;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::arg("dimension p must be at least 1"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::arg(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.diagonal > 0.0) || !self.diagonal.is_finite() {
            return Err(Error::arg(format!(
                "diagonal must be positive, got {}",
                self.diagonal
            )));
        }
        if !self.rho.is_finite() {
            return Err(Error::arg("rho must be finite"));
        }
        Ok(())
    }
}

/// Builds the model covariance and checks it is positive definite.
pub fn power_law_sigma(model: &PopulationModel) -> Result<SymMatrix> {
    model.validate()?;
    let exponent = -(model.alpha + 1.0);
    let sigma = SymMatrix::from_upper_fn(model.p, |i, j| {
        if i == j {
            model.diagonal
        } else {
            model.rho * ((j - i) as f64).powf(exponent)
        }
    })?;
    match cholesky(&sigma) {
        Ok(_) => Ok(sigma),
        Err(Error::NotPositiveDefinite { .. }) => Err(Error::arg(format!(
            "rho = {} and alpha = {} do not give a positive definite covariance at p = {}",
            model.rho, model.alpha, model.p
        ))),
        Err(e) => Err(e),
    }
}

/// Smallest `M₁` with `maxᵢ Σ_{|i−j|≥k} |σᵢⱼ| ≤ M₁ k^{−α}` for all
/// `k = 1..p−1`; 0 for `p = 1`.
pub fn approx_band_constant(sigma: &SymMatrix, alpha: f64) -> f64 {
    let p = sigma.dim();
    let mut best = 0.0_f64;
    // tail[i] = Σ_{|i−j| ≥ k} |σ_ij|, updated as k grows
    let mut tail: Vec<f64> = (0..p)
        .map(|i| (0..p).filter(|&j| j != i).map(|j| sigma.get(i, j).abs()).sum())
        .collect();
    for k in 1..p {
        let worst = tail.iter().fold(0.0_f64, |m, &v| m.max(v));
        best = best.max(worst * (k as f64).powf(alpha));
        for (i, t) in tail.iter_mut().enumerate() {
            if i >= k {
                *t -= sigma.get(i, i - k).abs();
            }
            if i + k < p {
                *t -= sigma.get(i, i + k).abs();
            }
        }
    }
    best
}
