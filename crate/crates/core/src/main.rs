use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bandcov::bandwidth::{select, SelectionMethod};
use bandcov::datagen::RngSpec;
use bandcov::estimators::DataSample;
use bandcov::harness::{emit_report, run_scenario, Estimator, ReportFormat, ScenarioSpec};
use bandcov::verify::{reports_to_csv, run_suite, Suite};
use bandcov::Error;

#[derive(Parser, Debug)]
#[command(name = "bandcov", version, about = "Banded covariance estimation with Sure-tuned bandwidths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation scenario and write per-replication errors.
    Run {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of cv_op,cv_l11,taper_sure,band_sure_f,band_sure_op (or `all`).
        #[arg(long, default_value = "all")]
        estimators: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        diagonal: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Select a bandwidth for an n x p numeric CSV and print the criterion curve.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Run a numerical oracle suite and print its reports as CSV.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run {
            p,
            n,
            alpha,
            rho,
            reps,
            seed,
            estimators,
            out,
            format,
            workers,
            diagonal,
            folds,
        } => {
            let format: ReportFormat = format.parse()?;
            let spec = ScenarioSpec {
                p,
                n,
                rho,
                alpha,
                replications: reps,
                seed,
                estimators: Estimator::parse_list(&estimators)?,
                diagonal,
                folds,
            };
            let workers = workers.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            });
            let report = run_scenario(&spec, workers)?;
            for f in &report.failures {
                eprintln!(
                    "warning: {} replication {} failed: {}",
                    f.estimator, f.replication, f.message
                );
            }
            for s in &report.summaries {
                let show = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.4}"));
                eprintln!("{:<13} mean {}  sd {}", s.estimator.as_str(), show(s.mean), show(s.sd));
            }
            for path in emit_report(&report, format, &out)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Select {
            input,
            method,
            seed,
            folds,
        } => {
            let method: SelectionMethod = method.parse()?;
            let data = read_numeric_csv(&input)?;
            let result = select(&data, method, folds, &mut RngSpec::new(seed, 0).rng())?;
            println!("method,{}", result.method);
            println!("chosen_k,{}", result.chosen_k);
            println!("k,criterion");
            for (k, v) in &result.curve {
                println!("{k},{v:.16e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let reports = run_suite(suite, seed)?;
            print!("{}", reports_to_csv(&reports)?);
            let failed = reports.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", reports.len());
                return Ok(ExitCode::from(2));
            }
            eprintln!("all {} checks passed", reports.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Rows of numbers; a leading non-numeric row is treated as a header.
fn read_numeric_csv(path: &PathBuf) -> Result<DataSample, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    what: path.display().to_string(),
                    message: format!("line {}: {e}", line + 1),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            what: path.display().to_string(),
            message: "no numeric rows".into(),
        });
    }
    DataSample::from_rows(&rows)
}
