//! Numerical oracles for the identities and inequalities behind the
//! estimator: second-moment identities of the sample covariance, the
//! Gaussian bilinear-form MGF, its trace and tail bounds, the block
//! structure of the banded error, and two scalar lemmas.
//!
//! Monte Carlo checks pass within 4 standard errors; deterministic checks
//! allow only floating-point slack.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::bandwidth::sure_constants;
use crate::datagen::{mvn_sample, standard_normals, RngSpec};
use crate::error::{Error, Result};
use crate::estimators::sample_cov;
use crate::linalg::{
    band, block, block_compress_with, block_count, cholesky, frob_norm, log_det_pd,
    max_abs_row_sum, sqrt_psd, DenseMatrix, MatrixRef, SpectralSolver, SymMatrix,
};

/// Monte Carlo acceptance width in standard errors.
pub const MC_SIGMAS: f64 = 4.0;
/// Slack for deterministic checks.
pub const DET_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|value − reference| ≤ tolerance`
    Equality,
    /// `value ≤ reference + tolerance`
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub check: String,
    pub target: String,
    pub kind: CheckKind,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub std_error: Option<f64>,
}

impl OracleReport {
    pub fn equality(
        check: impl Into<String>,
        target: impl Into<String>,
        value: f64,
        reference: f64,
        tolerance: f64,
        std_error: Option<f64>,
    ) -> Self {
        Self {
            check: check.into(),
            target: target.into(),
            kind: CheckKind::Equality,
            value,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
            std_error,
        }
    }

    pub fn upper_bound(
        check: impl Into<String>,
        target: impl Into<String>,
        value: f64,
        bound: f64,
        tolerance: f64,
        std_error: Option<f64>,
    ) -> Self {
        Self {
            check: check.into(),
            target: target.into(),
            kind: CheckKind::UpperBound,
            value,
            reference: bound,
            tolerance,
            pass: value <= bound + tolerance,
            std_error,
        }
    }

    /// Equality within `MC_SIGMAS` standard errors.
    fn monte_carlo(check: &str, target: String, mean: f64, se: f64, reference: f64) -> Self {
        Self::equality(check, target, mean, reference, MC_SIGMAS * se, Some(se))
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} / {}: value {:.6e} vs {} {:.6e} (tol {:.2e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.target,
            self.value,
            match self.kind {
                CheckKind::Equality => "reference",
                CheckKind::UpperBound => "bound",
            },
            self.reference,
            self.tolerance
        )
    }
}

pub fn reports_to_csv(reports: &[OracleReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    };
    w.write_record([
        "check", "target", "kind", "value", "reference", "tolerance", "std_error", "pass",
    ])
    .map_err(err)?;
    for r in reports {
        w.write_record([
            r.check.clone(),
            r.target.clone(),
            match r.kind {
                CheckKind::Equality => "equality".to_string(),
                CheckKind::UpperBound => "upper_bound".to_string(),
            },
            format!("{:.16e}", r.value),
            format!("{:.16e}", r.reference),
            format!("{:.16e}", r.tolerance),
            r.std_error.map(|s| format!("{s:.16e}")).unwrap_or_default(),
            r.pass.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::arg(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::arg(e.to_string()))
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Standard error of the mean.
    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Closed-form `E σ̂ᵢⱼ²` and `E σ̂ᵢᵢσ̂ⱼⱼ` for Gaussian data.
pub fn second_moments(sigma: &SymMatrix, n: usize, i: usize, j: usize) -> (f64, f64) {
    let nf = n as f64;
    let dd = sigma.get(i, i) * sigma.get(j, j);
    let sq = sigma.get(i, j) * sigma.get(i, j);
    (dd / (nf - 1.0) + nf * sq / (nf - 1.0), dd + 2.0 * sq / (nf - 1.0))
}

/// Monte Carlo check of the sample-covariance second moments for each pair
/// in `pairs`, and (for `n ≥ 3`) of the unbiased variance and squared-entry
/// estimators built from them.
pub fn check_moment_identities<R: Rng + ?Sized>(
    sigma: &SymMatrix,
    n: usize,
    reps: usize,
    pairs: &[(usize, usize)],
    rng: &mut R,
) -> Result<Vec<OracleReport>> {
    if n < 2 {
        return Err(Error::arg("moment identities need n >= 2"));
    }
    if reps < 100 {
        return Err(Error::arg("moment identities need at least 100 replications"));
    }
    let p = sigma.dim();
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= p || j >= p) {
        return Err(Error::arg(format!("pair ({i},{j}) out of range")));
    }
    let factor = cholesky(sigma)?;
    let consts = if n >= 3 { Some(sure_constants(n)?) } else { None };
    let mut acc = vec![[Moments::default(); 4]; pairs.len()];
    for _ in 0..reps {
        let s = sample_cov(&mvn_sample(&factor, n, rng)?)?;
        for (m, &(i, j)) in acc.iter_mut().zip(pairs) {
            let sq = s.get(i, j) * s.get(i, j);
            let dd = s.get(i, i) * s.get(j, j);
            m[0].push(sq);
            m[1].push(dd);
            if let Some(c) = consts {
                m[2].push(c.a * dd + c.b * sq);
                m[3].push(c.c * dd + c.d * sq);
            }
        }
    }
    let nf = n as f64;
    let mut out = Vec::new();
    for (m, &(i, j)) in acc.iter().zip(pairs) {
        let (e_sq, e_dd) = second_moments(sigma, n, i, j);
        out.push(OracleReport::monte_carlo(
            "moments",
            format!("E[s_{i}{j}^2]"),
            m[0].mean,
            m[0].std_error(),
            e_sq,
        ));
        out.push(OracleReport::monte_carlo(
            "moments",
            format!("E[s_{i}{i} s_{j}{j}]"),
            m[1].mean,
            m[1].std_error(),
            e_dd,
        ));
        if consts.is_some() {
            let dd = sigma.get(i, i) * sigma.get(j, j);
            let sq = sigma.get(i, j) * sigma.get(i, j);
            out.push(OracleReport::monte_carlo(
                "moments",
                format!("unbiased Var(s_{i}{j})"),
                m[2].mean,
                m[2].std_error(),
                (dd + sq) / (nf - 1.0),
            ));
            out.push(OracleReport::monte_carlo(
                "moments",
                format!("unbiased sigma_{i}{j}^2"),
                m[3].mean,
                m[3].std_error(),
                sq,
            ));
        }
    }
    Ok(out)
}

/// `B = Σ^{1/2} [[0, A], [Aᵀ, 0]] Σ^{1/2}` for the bilinear form `Q = XᵀAY`
/// with `(X, Y) ~ N(0, Σ)`, `X ∈ ℝᵖ`, `Y ∈ ℝ^q`.
#[derive(Debug, Clone)]
pub struct BilinearForm {
    pub sigma: SymMatrix,
    pub a: DenseMatrix,
    pub b: SymMatrix,
}

impl BilinearForm {
    pub fn new(sigma: SymMatrix, a: DenseMatrix) -> Result<Self> {
        let (p, q) = (a.nrows(), a.ncols());
        if sigma.dim() != p + q {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} covariance", p + q),
                got: format!("{0}x{0}", sigma.dim()),
            });
        }
        cholesky(&sigma)?;
        let j = SymMatrix::from_upper_fn(p + q, |r, c| {
            if r < p && c >= p {
                a.get(r, c - p)
            } else {
                0.0
            }
        })?;
        let root = sqrt_psd(&sigma)?.to_dense();
        let b = root.matmul(&j)?.matmul(&root)?;
        let b = SymMatrix::symmetrize(&b)?;
        Ok(Self { sigma, a, b })
    }

    fn p(&self) -> usize {
        self.a.nrows()
    }

    /// `E Q = tr(A Σ₂₁)`
    pub fn mean(&self) -> f64 {
        let p = self.p();
        let mut t = 0.0;
        for r in 0..p {
            for c in 0..self.a.ncols() {
                t += self.a.get(r, c) * self.sigma.get(p + c, r);
            }
        }
        t
    }

    pub fn trace_b(&self) -> f64 {
        self.b.diag().iter().sum()
    }

    pub fn trace_b2(&self) -> f64 {
        let f = frob_norm(&self.b);
        f * f
    }

    pub fn b_norm(&self) -> Result<f64> {
        precise().norm(&self.b)
    }

    /// `det(I − tB)^{−1/2}`
    pub fn mgf(&self, t: f64) -> Result<f64> {
        let m = SymMatrix::identity(self.b.dim()).sub(&self.b.scale(t))?;
        Ok((-0.5 * log_det_pd(&m)?).exp())
    }

    fn sampler(&self) -> Result<DenseMatrix> {
        cholesky(&self.sigma)
    }

    fn draw<R: Rng + ?Sized>(&self, factor: &DenseMatrix, rng: &mut R, buf: &mut Vec<f64>) -> f64 {
        let dim = self.sigma.dim();
        let z = standard_normals(rng, dim);
        buf.clear();
        buf.extend((0..dim).map(|i| factor.row(i)[..=i].iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()));
        let p = self.p();
        let (x, y) = buf.split_at(p);
        (0..p).map(|r| x[r] * self.a.row(r).iter().zip(y).map(|(a, y)| a * y).sum::<f64>()).sum()
    }
}

fn precise() -> SpectralSolver {
    SpectralSolver {
        tol: 1e-12,
        max_iter: 200_000,
    }
}

/// Monte Carlo `E exp(tQ)` against `det(I − tB)^{−1/2}` on a grid of `t`,
/// plus `E Q` against `tr(A Σ₂₁)` and the identity `tr(B)/2 = tr(A Σ₂₁)`.
pub fn check_mgf_identity<R: Rng + ?Sized>(
    form: &BilinearForm,
    t_grid: &[f64],
    reps: usize,
    rng: &mut R,
) -> Result<Vec<OracleReport>> {
    let limit = 1.0 / (2.0 * form.b_norm()?);
    if let Some(&t) = t_grid.iter().find(|t| t.abs() >= limit) {
        return Err(Error::arg(format!(
            "t = {t} outside the admissible range |t| < {limit}"
        )));
    }
    if reps < 2 {
        return Err(Error::arg("need at least 2 replications"));
    }
    let factor = form.sampler()?;
    let mut acc = vec![Moments::default(); t_grid.len()];
    let mut q_mom = Moments::default();
    let mut buf = Vec::new();
    for _ in 0..reps {
        let q = form.draw(&factor, rng, &mut buf);
        q_mom.push(q);
        for (m, &t) in acc.iter_mut().zip(t_grid) {
            m.push((t * q).exp());
        }
    }
    let mut out = Vec::new();
    for (m, &t) in acc.iter().zip(t_grid) {
        let se = if t == 0.0 { 0.0 } else { m.std_error() };
        out.push(OracleReport::monte_carlo(
            "mgf",
            format!("E exp(tQ), t={t}"),
            m.mean,
            se,
            form.mgf(t)?,
        ));
    }
    let mean = form.mean();
    out.push(OracleReport::monte_carlo(
        "mgf",
        "E Q".into(),
        q_mom.mean,
        q_mom.std_error(),
        mean,
    ));
    out.push(OracleReport::equality(
        "mgf",
        "tr(B)/2 = tr(A S21)",
        form.trace_b() / 2.0,
        mean,
        DET_SLACK * mean.abs().max(1.0),
        None,
    ));
    Ok(out)
}

/// `A = (u vᵀ) ∗ H`
pub fn schur_rank_one(u: &[f64], v: &[f64], h: &DenseMatrix) -> Result<DenseMatrix> {
    let outer = DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])?;
    outer.hadamard(h)
}

/// Deterministic check of
/// `tr(B²) ≤ 2‖Σ₁₂^abs‖²_op + 2‖Σ₁₁^abs‖_op ‖Σ₂₂^abs‖_op` for `A = (u vᵀ) ∗ H`.
pub fn check_trace_bound(
    sigma: &SymMatrix,
    u: &[f64],
    v: &[f64],
    h: &DenseMatrix,
) -> Result<OracleReport> {
    let k = u.len();
    if v.len() != k || h.nrows() != k || h.ncols() != k || sigma.dim() != 2 * k {
        return Err(Error::DimensionMismatch {
            expected: format!("u, v of length K, H KxK, Sigma 2Kx2K with K = {k}"),
            got: format!(
                "v {}, H {}x{}, Sigma {}",
                v.len(),
                h.nrows(),
                h.ncols(),
                sigma.dim()
            ),
        });
    }
    for (name, w) in [("u", u), ("v", v)] {
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (nrm - 1.0).abs() > 1e-10 {
            return Err(Error::arg(format!("{name} must be a unit vector, norm is {nrm}")));
        }
    }
    if h.max_abs() > 1.0 {
        return Err(Error::arg("entries of H must lie in [-1, 1]"));
    }
    let form = BilinearForm::new(sigma.clone(), schur_rank_one(u, v, h)?)?;
    let sub = |r0: usize, c0: usize| DenseMatrix::from_fn(k, k, |i, j| sigma.get(r0 + i, c0 + j).abs());
    let solver = precise();
    let n12 = solver.norm(&sub(0, k)?)?;
    let n11 = solver.norm(&sub(0, 0)?)?;
    let n22 = solver.norm(&sub(k, k)?)?;
    let rhs = 2.0 * n12 * n12 + 2.0 * n11 * n22;
    Ok(OracleReport::upper_bound(
        "trace",
        format!("tr(B^2) <= bound, K={k}"),
        form.trace_b2(),
        rhs,
        DET_SLACK * rhs.max(1.0),
        None,
    ))
}

/// `2 exp(−n t² / 2)`
pub fn tail_bound(n: usize, t: f64) -> f64 {
    2.0 * (-(n as f64) * t * t / 2.0).exp()
}

/// Empirical `P{|Q̄| > t √tr(B²)}` over `reps` means of `n` draws, against
/// `2 exp(−n t²/2)` plus 4 binomial standard errors.
pub fn check_tail_bound<R: Rng + ?Sized>(
    form: &BilinearForm,
    n: usize,
    t_grid: &[f64],
    reps: usize,
    rng: &mut R,
) -> Result<Vec<OracleReport>> {
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t < 0.5)) {
        return Err(Error::arg(format!("t = {t} outside (0, 1/2)")));
    }
    if n < 1 || reps < 1 {
        return Err(Error::arg("n and reps must be positive"));
    }
    let factor = form.sampler()?;
    let mean = form.mean();
    let scale = form.trace_b2().sqrt();
    let mut exceed = vec![0usize; t_grid.len()];
    let mut buf = Vec::new();
    for _ in 0..reps {
        let mut total = 0.0;
        for _ in 0..n {
            total += form.draw(&factor, rng, &mut buf) - mean;
        }
        let qbar = (total / n as f64).abs();
        for (e, &t) in exceed.iter_mut().zip(t_grid) {
            if qbar > t * scale {
                *e += 1;
            }
        }
    }
    Ok(exceed
        .iter()
        .zip(t_grid)
        .map(|(&e, &t)| {
            let bound = tail_bound(n, t);
            let q = bound.min(1.0);
            let se = (q * (1.0 - q) / reps as f64).sqrt();
            OracleReport::upper_bound(
                "tail",
                format!("P(|Qbar| > t sqrt(tr B^2)), n={n}, t={t}"),
                e as f64 / reps as f64,
                bound,
                MC_SIGMAS * se,
                Some(se),
            )
        })
        .collect())
}

/// `H₀ = 1{a > b}` of shape `rows × cols`.
pub fn strict_lower_ones(rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |a, b| if a > b { 1.0 } else { 0.0 })
        .expect("positive dimensions")
}

/// Structure of `D = Σ̂_K − Σ_K` for one sample of size `n`:
/// blocks with `|k − l| ≥ 2` vanish, off-diagonal blocks are Schur products
/// with `H₀`/`H₀ᵀ`, and `‖D‖ ≤ ‖D*‖ ≤ 3 max_{|k−l|≤1} ‖D(k,l)‖`.
pub fn check_band_structure<R: Rng + ?Sized>(
    sigma: &SymMatrix,
    n: usize,
    bandwidth: usize,
    rng: &mut R,
) -> Result<Vec<OracleReport>> {
    if bandwidth < 1 {
        return Err(Error::arg("bandwidth must be at least 1"));
    }
    let s = sample_cov(&mvn_sample(&cholesky(sigma)?, n, rng)?)?;
    let raw = s.sub(sigma)?;
    let d = band(&s, bandwidth)?.sub(&band(sigma, bandwidth)?)?;
    let nb = block_count(sigma.dim(), bandwidth);
    let tag = format!("p={}, K={bandwidth}", sigma.dim());

    let mut far = 0.0_f64;
    let mut schur = 0.0_f64;
    let mut free = Vec::new();
    for k in 0..nb {
        for l in 0..nb {
            let blk = block(&d, k, l, bandwidth)?;
            if k.abs_diff(l) >= 2 {
                far = far.max(blk.max_abs());
            } else if k != l {
                let r = block(&raw, k, l, bandwidth)?;
                let h = if k < l {
                    strict_lower_ones(r.nrows(), r.ncols())
                } else {
                    strict_lower_ones(r.ncols(), r.nrows()).transpose()
                };
                schur = schur.max(blk.sub(&r.hadamard(&h)?)?.max_abs());
                if blk.nrows() == bandwidth && blk.ncols() == bandwidth {
                    free.push(h.as_slice().iter().filter(|&&x| x != 0.0).count());
                }
            } else {
                schur = schur.max(blk.sub(&block(&raw, k, k, bandwidth)?)?.max_abs());
            }
        }
    }
    let solver = precise();
    let compressed = block_compress_with(&d, bandwidth, &solver)?;
    let lhs = solver.norm(&d)?;
    let mid = solver.norm(&compressed)?;
    let rhs = 3.0 * compressed.max_near_diagonal();

    let mut out = vec![
        OracleReport::equality("structure", format!("far blocks zero, {tag}"), far, 0.0, 0.0, None),
        OracleReport::equality("structure", format!("Schur form with H0, {tag}"), schur, 0.0, 0.0, None),
        OracleReport::upper_bound(
            "structure",
            format!("||D|| <= ||D*||, {tag}"),
            lhs,
            mid,
            DET_SLACK * mid.max(1.0),
            None,
        ),
        OracleReport::upper_bound(
            "structure",
            format!("||D*|| <= 3 max block, {tag}"),
            mid,
            rhs,
            DET_SLACK * rhs.max(1.0),
            None,
        ),
    ];
    if let Some(&max_free) = free.iter().max() {
        let want = bandwidth * (bandwidth - 1) / 2;
        out.push(OracleReport::equality(
            "structure",
            format!("off-diagonal block free entries, {tag}"),
            max_free as f64,
            want as f64,
            0.0,
            None,
        ));
    }
    Ok(out)
}

/// `‖A‖_op ≤ ‖A‖₁,₁` on `count` random symmetric matrices.
pub fn check_row_sum_bound<R: Rng + ?Sized>(
    count: usize,
    dim: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    let solver = precise();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let z = standard_normals(rng, dim * dim);
        let a = SymMatrix::from_upper_fn(dim, |i, j| z[i * dim + j])?;
        let gap = solver.norm(&a)? - max_abs_row_sum(&a);
        worst = worst.max(gap);
    }
    Ok(OracleReport::upper_bound(
        "structure",
        format!("max(||A||_op - ||A||_11) over {count} symmetric {dim}x{dim}"),
        worst,
        0.0,
        DET_SLACK,
        None,
    ))
}

/// `log(1 + x) − x + x²`
pub fn log_quadratic_gap(x: f64) -> f64 {
    x.ln_1p() - x + x * x
}

/// Non-negativity of `log(1+x) − x + x²` on `(−1/2, 10)` and the Chernoff
/// exponent `c₀a² − at = −t²/(4c₀)` at `a = t/(2c₀)`.
pub fn check_scalar_lemmas() -> Vec<OracleReport> {
    let lo = -0.499;
    let hi = 10.0;
    let steps = 200_000usize;
    let mut min = f64::INFINITY;
    let mut argmin = f64::NAN;
    for s in 0..=steps {
        let x = lo + (hi - lo) * s as f64 / steps as f64;
        let f = log_quadratic_gap(x);
        if f < min {
            min = f;
            argmin = x;
        }
    }
    // x = 0 is not on the grid; evaluate it explicitly
    let at_zero = log_quadratic_gap(0.0);
    if at_zero < min {
        min = at_zero;
        argmin = 0.0;
    }

    let mut identity_gap = 0.0_f64;
    for c0 in [0.05_f64, 0.3, 1.0, 2.5, 17.0] {
        for t in [1e-3, 0.1, 0.5, 1.0, 3.0, 40.0] {
            let a = t / (2.0 * c0);
            let lhs = c0 * a * a - a * t;
            let rhs = -t * t / (4.0 * c0);
            identity_gap = identity_gap.max((lhs - rhs).abs() / rhs.abs());
        }
    }

    vec![
        OracleReport::upper_bound("scalars", "-min f(x) on (-0.499, 10)", -min, 0.0, DET_SLACK, None),
        OracleReport::equality("scalars", "argmin f(x)", argmin, 0.0, 1e-12, None),
        OracleReport::equality("scalars", "f(0)", at_zero, 0.0, 0.0, None),
        OracleReport::equality(
            "scalars",
            "f(-0.4)",
            log_quadratic_gap(-0.4),
            0.6f64.ln() + 0.4 + 0.16,
            DET_SLACK,
            None,
        ),
        OracleReport::upper_bound(
            "scalars",
            "relative gap c0 a^2 - a t vs -t^2/(4 c0)",
            identity_gap,
            0.0,
            1e-14,
            None,
        ),
    ]
}

/// Random positive-definite covariance `W Wᵀ/dim + 0.5 I`.
pub fn random_covariance<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<SymMatrix> {
    let w = standard_normals(rng, dim * dim);
    SymMatrix::from_upper_fn(dim, |i, j| {
        let g: f64 = (0..dim).map(|k| w[i * dim + k] * w[j * dim + k]).sum::<f64>() / dim as f64;
        if i == j {
            g + 0.5
        } else {
            g
        }
    })
}

pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut z = standard_normals(rng, dim);
    let nrm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    z.iter_mut().for_each(|x| *x /= nrm);
    z
}

pub fn random_sign_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0)).expect("positive dimensions")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Moments,
    Mgf,
    Trace,
    Tail,
    Structure,
    Scalars,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moments" => Ok(Self::Moments),
            "mgf" => Ok(Self::Mgf),
            "trace" => Ok(Self::Trace),
            "tail" => Ok(Self::Tail),
            "structure" => Ok(Self::Structure),
            "scalars" => Ok(Self::Scalars),
            "all" => Ok(Self::All),
            other => Err(Error::arg(format!("unknown suite `{other}`"))),
        }
    }
}

// stream ids, one per suite
const MOMENTS_STREAM: u64 = 1;
const MGF_STREAM: u64 = 2;
const TRACE_STREAM: u64 = 3;
const TAIL_STREAM: u64 = 4;
const STRUCTURE_STREAM: u64 = 5;

pub fn moments_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = RngSpec::new(seed, MOMENTS_STREAM).rng();
    let sigma = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])?;
    let mut out = check_moment_identities(&sigma, 10, 100_000, &[(0, 1), (0, 0), (1, 1)], &mut rng)?;
    let diag = SymMatrix::from_diag(&[1.0, 2.0]);
    out.extend(check_moment_identities(&diag, 10, 20_000, &[(0, 1)], &mut rng)?);
    Ok(out)
}

/// `p = q = 1`, `Σ = I₂`, `A = [1]`: `E exp(tXY) = (1 − t²)^{−1/2}`.
pub fn scalar_bilinear_form() -> Result<BilinearForm> {
    BilinearForm::new(SymMatrix::identity(2), DenseMatrix::identity(1))
}

pub fn mgf_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = RngSpec::new(seed, MGF_STREAM).rng();
    let scalar = scalar_bilinear_form()?;
    let mut out = check_mgf_identity(&scalar, &[-0.3, -0.15, 0.0, 0.15, 0.3], 200_000, &mut rng)?;
    for t in [-0.3, -0.15, 0.0, 0.15, 0.3] {
        out.push(OracleReport::equality(
            "mgf",
            format!("det formula vs (1-t^2)^(-1/2), t={t}"),
            scalar.mgf(t)?,
            (1.0 - t * t).powf(-0.5),
            DET_SLACK,
            None,
        ));
    }
    let sigma = random_covariance(5, &mut rng)?;
    let a = DenseMatrix::from_row_major(3, 2, standard_normals(&mut rng, 6))?;
    let form = BilinearForm::new(sigma, a)?;
    let limit = 1.0 / (2.0 * form.b_norm()?);
    let grid: Vec<f64> = [-0.6, -0.3, 0.0, 0.3, 0.6].iter().map(|f| f * limit).collect();
    out.extend(check_mgf_identity(&form, &grid, 200_000, &mut rng)?);
    Ok(out)
}

pub fn trace_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = RngSpec::new(seed, TRACE_STREAM).rng();
    let k = 4;
    let e1: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let ones = DenseMatrix::from_fn(k, k, |_, _| 1.0)?;
    let mut out = vec![
        check_trace_bound(&SymMatrix::identity(2 * k), &e1, &e1, &ones)?,
        check_trace_bound(&SymMatrix::identity(2 * k), &e1, &e1, &DenseMatrix::zeros(k, k))?,
    ];
    let mut worst: Option<OracleReport> = None;
    for _ in 0..100 {
        let sigma = random_covariance(2 * k, &mut rng)?;
        let u = random_unit(k, &mut rng);
        let v = random_unit(k, &mut rng);
        let h = random_sign_matrix(k, k, &mut rng);
        let r = check_trace_bound(&sigma, &u, &v, &h)?;
        let slack = r.reference - r.value;
        if worst.as_ref().is_none_or(|w| slack < w.reference - w.value || !r.pass) {
            worst = Some(r);
        }
    }
    if let Some(mut w) = worst {
        w.target = format!("tightest of 100 random draws: {}", w.target);
        out.push(w);
    }
    Ok(out)
}

pub fn tail_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = RngSpec::new(seed, TAIL_STREAM).rng();
    let sigma = random_covariance(4, &mut rng)?;
    let a = DenseMatrix::from_row_major(2, 2, standard_normals(&mut rng, 4))?;
    let form = BilinearForm::new(sigma, a)?;
    let grid = [0.05, 0.1, 0.2, 0.3, 0.45];
    let mut out = Vec::new();
    for n in [50, 200] {
        out.extend(check_tail_bound(&form, n, &grid, 10_000, &mut rng)?);
    }
    Ok(out)
}

pub fn structure_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = RngSpec::new(seed, STRUCTURE_STREAM).rng();
    let power = |p: usize| {
        crate::estimators::power_law_sigma(&crate::estimators::PopulationModel::new(p, 0.6, 0.5))
    };
    let mut out = check_band_structure(&power(9)?, 20, 3, &mut rng)?;
    out.extend(check_band_structure(&power(7)?, 20, 3, &mut rng)?);
    out.extend(check_band_structure(&power(6)?, 20, 8, &mut rng)?);

    // 50 draws at p = 60, K = 5, folded into one report per property
    let sigma = power(60)?;
    let mut merged: Vec<OracleReport> = Vec::new();
    for _ in 0..50 {
        let reports = check_band_structure(&sigma, 100, 5, &mut rng)?;
        if merged.is_empty() {
            merged = reports;
            continue;
        }
        for (m, r) in merged.iter_mut().zip(reports) {
            let worse = match m.kind {
                CheckKind::Equality => (r.value - r.reference).abs() > (m.value - m.reference).abs(),
                CheckKind::UpperBound => r.value - r.reference > m.value - m.reference,
            };
            if worse || !r.pass {
                *m = r;
            }
        }
    }
    for m in &mut merged {
        m.target = format!("worst of 50 draws: {}", m.target);
    }
    out.extend(merged);
    out.push(check_row_sum_bound(100, 12, &mut rng)?);
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<OracleReport>> {
    Ok(match suite {
        Suite::Moments => moments_suite(seed)?,
        Suite::Mgf => mgf_suite(seed)?,
        Suite::Trace => trace_suite(seed)?,
        Suite::Tail => tail_suite(seed)?,
        Suite::Structure => structure_suite(seed)?,
        Suite::Scalars => check_scalar_lemmas(),
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Scalars,
                Suite::Structure,
                Suite::Trace,
                Suite::Moments,
                Suite::Mgf,
                Suite::Tail,
            ] {
                all.extend(run_suite(s, seed)?);
            }
            all
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_moments_degenerate_case() {
        let sigma = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        for n in [3, 10, 50] {
            let (e_sq, e_dd) = second_moments(&sigma, n, 0, 0);
            let want = 4.0 * (n as f64 + 1.0) / (n as f64 - 1.0);
            assert!((e_sq - want).abs() < 1e-12);
            assert!((e_dd - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_value_for_correlated_pair() {
        let sigma = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let (e_sq, _) = second_moments(&sigma, 10, 0, 1);
        assert!((e_sq - 3.5 / 9.0).abs() < 1e-15);
        let diag = SymMatrix::from_diag(&[1.0, 3.0]);
        assert!((second_moments(&diag, 10, 0, 1).0 - 3.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_form_matches_closed_form() {
        let f = scalar_bilinear_form().unwrap();
        assert_eq!(f.mgf(0.0).unwrap(), 1.0);
        for t in [-0.4, 0.1, 0.45] {
            assert!((f.mgf(t).unwrap() - (1.0 - t * t).powf(-0.5)).abs() < 1e-12);
        }
        assert!((f.b_norm().unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(f.mean(), 0.0);
    }

    #[test]
    fn mgf_rejects_wide_grid() {
        let f = scalar_bilinear_form().unwrap();
        let mut rng = RngSpec::new(0, 0).rng();
        assert!(check_mgf_identity(&f, &[0.6], 100, &mut rng).unwrap_err().is_validation());
    }

    #[test]
    fn trace_bound_identity_case_is_tight() {
        let e1 = [1.0, 0.0, 0.0];
        let ones = DenseMatrix::from_fn(3, 3, |_, _| 1.0).unwrap();
        let r = check_trace_bound(&SymMatrix::identity(6), &e1, &e1, &ones).unwrap();
        assert!(r.pass);
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.reference - 2.0).abs() < 1e-9);
        let zero = check_trace_bound(&SymMatrix::identity(6), &e1, &e1, &DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn trace_bound_preconditions() {
        let sigma = SymMatrix::identity(4);
        let h = DenseMatrix::from_fn(2, 2, |_, _| 1.0).unwrap();
        assert!(check_trace_bound(&sigma, &[1.0, 1.0], &[1.0, 0.0], &h).is_err());
        let big = DenseMatrix::from_fn(2, 2, |_, _| 1.5).unwrap();
        assert!(check_trace_bound(&sigma, &[1.0, 0.0], &[1.0, 0.0], &big).is_err());
    }

    #[test]
    fn tail_bound_arithmetic() {
        assert!((tail_bound(50, 0.5) - 2.0 * (-6.25f64).exp()).abs() < 1e-15);
        assert!((tail_bound(50, 0.5) - 3.86e-3).abs() < 1e-5);
        // doubling n halves the log of the bound's exponential factor
        let t = 0.3;
        let l1 = (tail_bound(50, t) / 2.0).ln();
        let l2 = (tail_bound(100, t) / 2.0).ln();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn tail_rejects_bad_grid() {
        let f = scalar_bilinear_form().unwrap();
        let mut rng = RngSpec::new(0, 0).rng();
        assert!(check_tail_bound(&f, 10, &[0.5], 10, &mut rng).is_err());
        assert!(check_tail_bound(&f, 10, &[0.0], 10, &mut rng).is_err());
    }

    #[test]
    fn scalar_lemmas_pass() {
        let reports = check_scalar_lemmas();
        assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
        assert!((log_quadratic_gap(-0.4) - 0.0492).abs() < 1e-4);
    }

    #[test]
    fn nine_by_nine_with_three_blocks() {
        let sigma = crate::estimators::power_law_sigma(&crate::estimators::PopulationModel::new(9, 0.6, 0.5)).unwrap();
        let reports = check_band_structure(&sigma, 15, 3, &mut RngSpec::new(5, 0).rng()).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
        let free = reports.iter().find(|r| r.target.contains("free entries")).unwrap();
        assert_eq!(free.value, 3.0);
    }

    #[test]
    fn single_block_chain() {
        let sigma = crate::estimators::power_law_sigma(&crate::estimators::PopulationModel::new(5, 0.6, 0.5)).unwrap();
        let reports = check_band_structure(&sigma, 12, 7, &mut RngSpec::new(2, 0).rng()).unwrap();
        assert!(reports.iter().all(|r| r.pass));
        let lhs = reports.iter().find(|r| r.target.starts_with("||D|| <=")).unwrap();
        // one block: the compressed norm equals the norm itself
        assert!((lhs.value - lhs.reference).abs() <= 1e-10 * lhs.value);
    }

    #[test]
    fn report_pass_rules() {
        assert!(OracleReport::equality("c", "t", 1.0, 1.05, 0.1, None).pass);
        assert!(!OracleReport::equality("c", "t", 1.0, 1.2, 0.1, None).pass);
        assert!(OracleReport::upper_bound("c", "t", -5.0, 1.0, 0.0, None).pass);
        assert!(!OracleReport::upper_bound("c", "t", 1.5, 1.0, 0.1, None).pass);
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let csv = reports_to_csv(&check_scalar_lemmas()).unwrap();
        assert_eq!(csv.lines().count(), 1 + check_scalar_lemmas().len());
        assert!(csv.starts_with("check,target,kind,value"));
    }
}
