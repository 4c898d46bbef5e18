//! Simulation scenarios: repeated draws from the power-law model, every
//! requested estimator applied to the same replication, squared
//! operator-norm errors recorded and summarized.
//!
//! Replication `r` draws its data from stream `r` of the master seed and its
//! fold split from the auxiliary stream of `r`, so results do not depend on
//! how replications are scheduled across workers.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_select_with_plan, select_sure, CvLoss, FoldPlan, SelectionMethod};
use crate::datagen::{mvn_sample, RngSpec};
use crate::error::{Error, Result};
use crate::estimators::{power_law_sigma, sample_cov, taper, PopulationModel};
use crate::linalg::{band, cholesky, op_norm_default, DenseMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Banding, 10-fold CV under squared operator norm.
    CvOp,
    /// Banding, 10-fold CV under the maximum absolute row sum.
    CvL11,
    /// Tapering with its Frobenius Sure bandwidth.
    TaperSure,
    BandSureF,
    BandSureOp,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::CvOp,
        Estimator::CvL11,
        Estimator::TaperSure,
        Estimator::BandSureF,
        Estimator::BandSureOp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::CvOp => "cv_op",
            Estimator::CvL11 => "cv_l11",
            Estimator::TaperSure => "taper_sure",
            Estimator::BandSureF => "band_sure_f",
            Estimator::BandSureOp => "band_sure_op",
        }
    }

    /// Parses a comma-separated list; `all` expands to every estimator.
    pub fn parse_list(s: &str) -> Result<Vec<Estimator>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok == "all" {
                out.extend(Self::ALL);
            } else {
                out.push(tok.parse()?);
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|e| seen.insert(*e));
        Ok(out)
    }

    fn uses_cv(&self) -> bool {
        matches!(self, Estimator::CvOp | Estimator::CvL11)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown estimator `{s}`")))
    }
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub diagonal: f64,
    pub folds: usize,
}

impl ScenarioSpec {
    /// Cell with `ρ = 0.6`, unit diagonal and 10 folds.
    pub fn new(p: usize, n: usize, alpha: f64, replications: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            rho: 0.6,
            alpha,
            replications,
            seed,
            estimators: Estimator::ALL.to_vec(),
            diagonal: 1.0,
            folds: 10,
        }
    }

    pub fn with_estimators(mut self, estimators: Vec<Estimator>) -> Self {
        self.estimators = estimators;
        self
    }

    pub fn model(&self) -> PopulationModel {
        PopulationModel::new(self.p, self.rho, self.alpha).with_diagonal(self.diagonal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::arg("replications must be at least 1"));
        }
        if self.n < 3 {
            return Err(Error::arg(format!("n must be at least 3, got {}", self.n)));
        }
        if self.estimators.iter().any(Estimator::uses_cv) {
            if self.folds < 2 {
                return Err(Error::arg("cross-validation needs at least 2 folds"));
            }
            // every held-out fold and its complement need two rows
            if self.n < 2 * self.folds {
                return Err(Error::arg(format!(
                    "{} folds need n >= {}, got {}",
                    self.folds,
                    2 * self.folds,
                    self.n
                )));
            }
        }
        self.model().validate()
    }
}

/// Outcome of one estimator on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub estimator: Estimator,
    pub replication: usize,
    /// `None` when the cell failed.
    pub selected_k: Option<usize>,
    pub sq_op_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub estimator: Estimator,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    /// Mean squared operator-norm error over completed replications.
    pub mean: Option<f64>,
    /// Sample standard deviation (`R − 1` denominator); absent for `R < 2`.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub alpha: f64,
    pub p: usize,
    pub n: usize,
    /// Ordered by estimator (scenario order), then replication.
    pub records: Vec<ReplicationRecord>,
    pub summaries: Vec<EstimatorSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<CellFailure>,
}

impl SimulationReport {
    pub fn summary(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }

    pub fn mean(&self, estimator: Estimator) -> Option<f64> {
        self.summary(estimator).and_then(|s| s.mean)
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (Some(mean), Some((ss / (n - 1.0)).sqrt()))
}

fn summarize(estimators: &[Estimator], records: &[ReplicationRecord]) -> Vec<EstimatorSummary> {
    estimators
        .iter()
        .map(|&e| {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.estimator == e)
                .filter_map(|r| r.sq_op_error)
                .collect();
            let (mean, sd) = mean_sd(&errs);
            EstimatorSummary {
                estimator: e,
                mean,
                sd,
            }
        })
        .collect()
}

struct Context {
    sigma: SymMatrix,
    factor: DenseMatrix,
}

fn fit(
    estimator: Estimator,
    spec: &ScenarioSpec,
    stream: RngSpec,
    x: &crate::estimators::DataSample,
    s: &SymMatrix,
) -> Result<(usize, SymMatrix)> {
    match estimator {
        Estimator::BandSureF | Estimator::BandSureOp => {
            let method = if estimator == Estimator::BandSureF {
                SelectionMethod::SureF
            } else {
                SelectionMethod::SureOp
            };
            let k = select_sure(s, spec.n, method)?.chosen_k;
            Ok((k, band(s, k)?))
        }
        Estimator::TaperSure => {
            let k = select_sure(s, spec.n, SelectionMethod::SureTaper)?.chosen_k;
            Ok((k, taper(s, k)?))
        }
        Estimator::CvOp | Estimator::CvL11 => {
            let loss = if estimator == Estimator::CvOp {
                CvLoss::Op
            } else {
                CvLoss::L11
            };
            let plan = FoldPlan::random(spec.n, spec.folds, &mut stream.auxiliary().rng())?;
            let k = cv_select_with_plan(x, loss, &plan)?.chosen_k;
            Ok((k, band(s, k)?))
        }
    }
}

fn run_replication(
    spec: &ScenarioSpec,
    ctx: &Context,
    r: usize,
) -> Vec<std::result::Result<(usize, f64), String>> {
    let stream = RngSpec::new(spec.seed, r as u64);
    let shared = mvn_sample(&ctx.factor, spec.n, &mut stream.rng())
        .and_then(|x| sample_cov(&x).map(|s| (x, s)));
    let (x, s) = match shared {
        Ok(v) => v,
        Err(e) => return vec![Err(e.to_string()); spec.estimators.len()],
    };
    spec.estimators
        .iter()
        .map(|&e| {
            fit(e, spec, stream, &x, &s)
                .and_then(|(k, est)| {
                    let err = op_norm_default(&est.sub(&ctx.sigma)?)?;
                    Ok((k, err * err))
                })
                .map_err(|err| err.to_string())
        })
        .collect()
}

/// Runs every replication of `spec` on a pool of `workers` threads.
///
/// A failing estimator marks only its own cell as failed.
pub fn run_scenario(spec: &ScenarioSpec, workers: usize) -> Result<SimulationReport> {
    spec.validate()?;
    let sigma = power_law_sigma(&spec.model())?;
    let factor = cholesky(&sigma)?;
    let ctx = Context { sigma, factor };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::arg(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<Vec<_>> = pool.install(|| {
        (0..spec.replications)
            .into_par_iter()
            .map(|r| run_replication(spec, &ctx, r))
            .collect()
    });

    let mut records = Vec::with_capacity(spec.replications * spec.estimators.len());
    let mut failures = Vec::new();
    for (ei, &estimator) in spec.estimators.iter().enumerate() {
        for (r, row) in outcomes.iter().enumerate() {
            match &row[ei] {
                Ok((k, err)) => records.push(ReplicationRecord {
                    estimator,
                    replication: r,
                    selected_k: Some(*k),
                    sq_op_error: Some(*err),
                }),
                Err(message) => {
                    records.push(ReplicationRecord {
                        estimator,
                        replication: r,
                        selected_k: None,
                        sq_op_error: None,
                    });
                    failures.push(CellFailure {
                        estimator,
                        replication: r,
                        message: message.clone(),
                    });
                }
            }
        }
    }
    Ok(SimulationReport {
        alpha: spec.alpha,
        p: spec.p,
        n: spec.n,
        summaries: summarize(&spec.estimators, &records),
        records,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::arg(format!("unknown report format `{other}`"))),
        }
    }
}

pub const LONG_HEADER: [&str; 7] = [
    "alpha",
    "p",
    "n",
    "estimator",
    "replication",
    "selected_k",
    "sq_op_error",
];
pub const SUMMARY_HEADER: [&str; 6] = ["alpha", "p", "n", "estimator", "mean", "sd"];

/// 17 significant digits: lossless for every `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `runs/out.csv` → `runs/out_summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let name = match path.extension() {
        Some(ext) => format!("{stem}_summary.{}", ext.to_string_lossy()),
        None => format!("{stem}_summary"),
    };
    path.with_file_name(name)
}

pub fn long_csv_string(report: &SimulationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let alpha = report.alpha.to_string();
    let (p, n) = (report.p.to_string(), report.n.to_string());
    w.write_record(LONG_HEADER).map_err(csv_err)?;
    for r in &report.records {
        w.write_record([
            alpha.as_str(),
            &p,
            &n,
            r.estimator.as_str(),
            &r.replication.to_string(),
            &r.selected_k.map(|k| k.to_string()).unwrap_or_default(),
            &fmt_opt_f64(r.sq_op_error),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

pub fn summary_csv_string(report: &SimulationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let alpha = report.alpha.to_string();
    let (p, n) = (report.p.to_string(), report.n.to_string());
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in &report.summaries {
        w.write_record([
            alpha.as_str(),
            &p,
            &n,
            s.estimator.as_str(),
            &fmt_opt_f64(s.mean),
            &fmt_opt_f64(s.sd),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::arg(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::arg(format!("csv buffer: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes the report; returns the paths written. CSV produces the long-form
/// file at `path` plus [`summary_path`]; JSON produces one file.
pub fn emit_report(report: &SimulationReport, format: ReportFormat, path: &Path) -> Result<Vec<PathBuf>> {
    match format {
        ReportFormat::Csv => {
            write_file(path, &long_csv_string(report)?)?;
            let sp = summary_path(path);
            write_file(&sp, &summary_csv_string(report)?)?;
            Ok(vec![path.to_path_buf(), sp])
        }
        ReportFormat::Json => {
            let body = serde_json::to_string_pretty(report).map_err(|e| Error::Parse {
                what: "json".into(),
                message: e.to_string(),
            })?;
            write_file(path, &body)?;
            Ok(vec![path.to_path_buf()])
        }
    }
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    rec.get(idx)
        .ok_or_else(|| Error::Parse {
            what: "csv".into(),
            message: format!("missing column {name}"),
        })?
        .parse()
        .map_err(|_| Error::Parse {
            what: "csv".into(),
            message: format!("bad value in column {name}: {:?}", rec.get(idx)),
        })
}

fn parse_opt<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<T>> {
    match rec.get(idx) {
        Some("") | None => Ok(None),
        Some(_) => parse_field(rec, idx, name).map(Some),
    }
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            what: "csv header".into(),
            message: format!("expected {}, got {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

/// Parses the long-form and summary CSV texts back into a report. Failed
/// cells come back as records without values and empty-message failures.
pub fn parse_csv_report(long: &str, summary: &str) -> Result<SimulationReport> {
    let mut meta: Option<(f64, usize, usize)> = None;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut reader = csv::Reader::from_reader(long.as_bytes());
    check_header(&mut reader, &LONG_HEADER)?;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        meta.get_or_insert((
            parse_field(&rec, 0, "alpha")?,
            parse_field(&rec, 1, "p")?,
            parse_field(&rec, 2, "n")?,
        ));
        let record = ReplicationRecord {
            estimator: parse_field(&rec, 3, "estimator")?,
            replication: parse_field(&rec, 4, "replication")?,
            selected_k: parse_opt(&rec, 5, "selected_k")?,
            sq_op_error: parse_opt(&rec, 6, "sq_op_error")?,
        };
        if record.sq_op_error.is_none() {
            failures.push(CellFailure {
                estimator: record.estimator,
                replication: record.replication,
                message: String::new(),
            });
        }
        records.push(record);
    }
    let mut summaries = Vec::new();
    let mut reader = csv::Reader::from_reader(summary.as_bytes());
    check_header(&mut reader, &SUMMARY_HEADER)?;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        meta.get_or_insert((
            parse_field(&rec, 0, "alpha")?,
            parse_field(&rec, 1, "p")?,
            parse_field(&rec, 2, "n")?,
        ));
        summaries.push(EstimatorSummary {
            estimator: parse_field(&rec, 3, "estimator")?,
            mean: parse_opt(&rec, 4, "mean")?,
            sd: parse_opt(&rec, 5, "sd")?,
        });
    }
    let (alpha, p, n) = meta.unwrap_or((f64::NAN, 0, 0));
    Ok(SimulationReport {
        alpha,
        p,
        n,
        records,
        summaries,
        failures,
    })
}

/// Reads a report written by [`emit_report`].
pub fn read_report(format: ReportFormat, path: &Path) -> Result<SimulationReport> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    match format {
        ReportFormat::Csv => parse_csv_report(&read(path)?, &read(&summary_path(path))?),
        ReportFormat::Json => serde_json::from_str(&read(path)?).map_err(|e| Error::Parse {
            what: "json report".into(),
            message: e.to_string(),
        }),
    }
}
