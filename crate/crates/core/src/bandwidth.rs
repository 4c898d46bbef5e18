//! Bandwidth selection: the unbiased Frobenius-risk criterion (Sure), its
//! reweighted operator-norm variant, a Sure criterion for the taper, and
//! K-fold cross-validation under the squared operator norm or the maximum
//! absolute row sum.
//!
//! Every selector returns the full criterion curve together with its argmin;
//! ties go to the smallest bandwidth.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{sample_cov, taper_weight, DataSample};
use crate::linalg::{max_abs_row_sum, MatrixRef, SpectralSolver, SymMatrix};

/// Coefficients of the unbiased estimators
/// `Var(σ̂ᵢⱼ) ≈ a σ̂ᵢᵢσ̂ⱼⱼ + b σ̂ᵢⱼ²` and `σᵢⱼ² ≈ c σ̂ᵢᵢσ̂ⱼⱼ + d σ̂ᵢⱼ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SureConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn sure_constants(n: usize) -> Result<SureConstants> {
    if n < 3 {
        return Err(Error::arg(format!("Sure constants need n >= 3, got {n}")));
    }
    let nf = n as f64;
    let denom = nf * nf - nf - 2.0;
    Ok(SureConstants {
        a: (nf - 1.0) / denom,
        b: (nf - 3.0) / denom,
        c: (1.0 - nf) / denom,
        d: (nf - 1.0) * (nf - 1.0) / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    SureF,
    SureOp,
    /// Sure criterion of the tapering estimator; bandwidths are even.
    SureTaper,
    CvOp,
    CvL11,
}

impl SelectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMethod::SureF => "sure_f",
            SelectionMethod::SureOp => "sure_op",
            SelectionMethod::SureTaper => "sure_taper",
            SelectionMethod::CvOp => "cv_op",
            SelectionMethod::CvL11 => "cv_l11",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sure_f" => Ok(Self::SureF),
            "sure_op" => Ok(Self::SureOp),
            "sure_taper" => Ok(Self::SureTaper),
            "cv_op" => Ok(Self::CvOp),
            "cv_l11" => Ok(Self::CvL11),
            other => Err(Error::arg(format!("unknown selection method `{other}`"))),
        }
    }
}

/// Chosen bandwidth and the criterion values it was chosen from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub chosen_k: usize,
    /// `(K, criterion)` in increasing `K`.
    pub curve: Vec<(usize, f64)>,
}

impl SelectionResult {
    fn from_curve(method: SelectionMethod, curve: Vec<(usize, f64)>) -> Result<Self> {
        let chosen_k = argmin(&curve)
            .ok_or_else(|| Error::arg("criterion curve is empty or not finite"))?;
        Ok(Self {
            method,
            chosen_k,
            curve,
        })
    }
}

/// Smallest `K` attaining the minimum; `None` for an empty curve or NaNs.
pub fn argmin(curve: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, v) in curve {
        if v.is_nan() {
            return None;
        }
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((k, v)),
        }
    }
    best.map(|(k, _)| k)
}

/// Per-lag sums of the unbiased variance and squared-entry estimates over
/// all ordered pairs `(i, j)` with `|i − j| = m`.
struct LagSums {
    variance: Vec<f64>,
    squared: Vec<f64>,
}

impl LagSums {
    fn new(s: &SymMatrix, n: usize) -> Result<Self> {
        let k = sure_constants(n)?;
        let p = s.dim();
        let diag = s.diag();
        let mut variance = vec![0.0; p];
        let mut squared = vec![0.0; p];
        for i in 0..p {
            let row = s.row(i);
            for j in i..p {
                let dd = diag[i] * diag[j];
                let sq = row[j] * row[j];
                let mult = if i == j { 1.0 } else { 2.0 };
                variance[j - i] += mult * (k.a * dd + k.b * sq);
                squared[j - i] += mult * (k.c * dd + k.d * sq);
            }
        }
        Ok(Self { variance, squared })
    }

    fn p(&self) -> usize {
        self.variance.len()
    }

    /// `prefix[K] = Σ_{m<K} variance[m]`
    fn variance_prefix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.p() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for v in &self.variance {
            acc += v;
            out.push(acc);
        }
        out
    }
}

/// `Sure_F(K)` for `K = 1..p`.
pub fn sure_f(s: &SymMatrix, n: usize) -> Result<Vec<(usize, f64)>> {
    let sums = LagSums::new(s, n)?;
    let p = sums.p();
    let var_prefix = sums.variance_prefix();
    // bias_suffix[K] = Σ_{m≥K} squared[m]
    let mut bias_suffix = vec![0.0; p + 1];
    for m in (0..p).rev() {
        bias_suffix[m] = bias_suffix[m + 1] + sums.squared[m];
    }
    Ok((1..=p)
        .map(|k| (k, var_prefix[k] + bias_suffix[k]))
        .collect())
}

/// Bias weight `W = K exp(1 − |i − j| / K)` of the operator-norm criterion.
pub fn sure_weight(lag: usize, bandwidth: usize) -> f64 {
    let k = bandwidth as f64;
    k * (1.0 - lag as f64 / k).exp()
}

/// `Sure_op(K)` for `K = 1..p`.
pub fn sure_op(s: &SymMatrix, n: usize) -> Result<Vec<(usize, f64)>> {
    let sums = LagSums::new(s, n)?;
    let p = sums.p();
    let var_prefix = sums.variance_prefix();
    Ok((1..=p)
        .map(|k| {
            let bias: f64 = (k..p).map(|m| sure_weight(m, k) * sums.squared[m]).sum();
            (k, var_prefix[k] + bias)
        })
        .collect())
}

/// Even taper bandwidths searched by [`sure_taper`]: `2, 4, …, max(2, 2(p−1))`.
pub fn taper_bandwidths(p: usize) -> impl Iterator<Item = usize> {
    (1..=(p.saturating_sub(1)).max(1)).map(|h| 2 * h)
}

/// Unbiased Frobenius risk of the tapering estimator,
/// `Σ w² Var̂(σ̂ᵢⱼ) + (1 − w)² σ̂²ᵢⱼ,unbiased`, over even `K`.
pub fn sure_taper(s: &SymMatrix, n: usize) -> Result<Vec<(usize, f64)>> {
    let sums = LagSums::new(s, n)?;
    let p = sums.p();
    Ok(taper_bandwidths(p)
        .map(|k| {
            let v: f64 = (0..p)
                .map(|m| {
                    let w = taper_weight(m, k);
                    w * w * sums.variance[m] + (1.0 - w) * (1.0 - w) * sums.squared[m]
                })
                .sum();
            (k, v)
        })
        .collect())
}

/// Sure-type selection from a sample covariance built on `n` observations.
///
/// `SureOp` first finds `K̂_F` and then searches `K̂_F ..= min(K̂_F², p)`.
pub fn select_sure(s: &SymMatrix, n: usize, method: SelectionMethod) -> Result<SelectionResult> {
    match method {
        SelectionMethod::SureF => SelectionResult::from_curve(method, sure_f(s, n)?),
        SelectionMethod::SureOp => {
            let k_f = SelectionResult::from_curve(SelectionMethod::SureF, sure_f(s, n)?)?.chosen_k;
            let hi = k_f.saturating_mul(k_f).min(s.dim());
            let curve = sure_op(s, n)?
                .into_iter()
                .filter(|&(k, _)| k >= k_f && k <= hi)
                .collect();
            SelectionResult::from_curve(method, curve)
        }
        SelectionMethod::SureTaper => SelectionResult::from_curve(method, sure_taper(s, n)?),
        SelectionMethod::CvOp | SelectionMethod::CvL11 => Err(Error::arg(format!(
            "{method} needs the raw data; use cv_select"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvLoss {
    /// Squared operator norm.
    Op,
    /// Maximum absolute row sum.
    L11,
}

impl CvLoss {
    pub fn method(&self) -> SelectionMethod {
        match self {
            CvLoss::Op => SelectionMethod::CvOp,
            CvLoss::L11 => SelectionMethod::CvL11,
        }
    }
}

/// Assignment of each observation to a fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    /// Random near-equal split: shuffle the rows, then deal them round-robin
    /// so fold sizes differ by at most one.
    pub fn random<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Result<Self> {
        if folds < 2 {
            return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
        }
        if n < folds {
            return Err(Error::arg(format!("{folds} folds need n >= {folds}, got {n}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut assignment = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            assignment[row] = pos % folds;
        }
        Self::from_assignment(assignment)
    }

    /// Explicit assignment; fold ids must be `0..folds` with none empty.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let folds = assignment.iter().max().map_or(0, |m| m + 1);
        if folds < 2 {
            return Err(Error::arg("need at least 2 folds"));
        }
        let mut sizes = vec![0usize; folds];
        assignment.iter().for_each(|&f| sizes[f] += 1);
        if let Some(f) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::arg(format!("fold {f} is empty")));
        }
        Ok(Self { folds, assignment })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// `(training rows, held-out rows)` for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&r| self.assignment[r] != f)
    }
}

/// Average held-out loss of the banded training covariance for `K = 1..p`.
pub fn cv_curve(x: &DataSample, loss: CvLoss, plan: &FoldPlan) -> Result<Vec<(usize, f64)>> {
    if plan.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("fold plan over {} rows", x.n()),
            got: format!("{}", plan.n()),
        });
    }
    let p = x.p();
    let solver = SpectralSolver::default();
    let mut totals = vec![0.0; p];
    for f in 0..plan.folds() {
        let (train, test) = plan.split(f);
        if train.len() < 2 || test.len() < 2 {
            return Err(Error::arg(format!(
                "fold {f} leaves {} training and {} held-out rows; both need at least 2",
                train.len(),
                test.len()
            )));
        }
        let s_train = sample_cov(&x.select_rows(&train)?)?;
        let s_test = sample_cov(&x.select_rows(&test)?)?;

        // diff = band(s_train, K) − s_test, grown one lag at a time
        let mut diff = s_test.scale(-1.0);
        let mut warm: Option<Vec<f64>> = None;
        for k in 1..=p {
            let lag = k - 1;
            for i in 0..(p - lag) {
                let j = i + lag;
                diff.set_sym(i, j, s_train.get(i, j) - s_test.get(i, j));
            }
            let value = match loss {
                CvLoss::Op => {
                    let est = solver.estimate(&diff, warm.as_deref())?;
                    let v = est.norm * est.norm;
                    warm = Some(est.vector);
                    v
                }
                CvLoss::L11 => max_abs_row_sum(&diff),
            };
            totals[k - 1] += value;
        }
    }
    let folds = plan.folds() as f64;
    Ok(totals
        .into_iter()
        .enumerate()
        .map(|(i, t)| (i + 1, t / folds))
        .collect())
}

/// K-fold cross-validated bandwidth with a random fold split drawn from `rng`.
pub fn cv_select<R: Rng + ?Sized>(
    x: &DataSample,
    loss: CvLoss,
    folds: usize,
    rng: &mut R,
) -> Result<SelectionResult> {
    let plan = FoldPlan::random(x.n(), folds, rng)?;
    cv_select_with_plan(x, loss, &plan)
}

pub fn cv_select_with_plan(x: &DataSample, loss: CvLoss, plan: &FoldPlan) -> Result<SelectionResult> {
    SelectionResult::from_curve(loss.method(), cv_curve(x, loss, plan)?)
}

/// Selects a bandwidth from raw data with any method.
pub fn select<R: Rng + ?Sized>(
    x: &DataSample,
    method: SelectionMethod,
    folds: usize,
    rng: &mut R,
) -> Result<SelectionResult> {
    match method {
        SelectionMethod::CvOp => cv_select(x, CvLoss::Op, folds, rng),
        SelectionMethod::CvL11 => cv_select(x, CvLoss::L11, folds, rng),
        _ => select_sure(&sample_cov(x)?, x.n(), method),
    }
}
