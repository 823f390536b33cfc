//! Command-line interface.
//!
//! Exit codes: 0 — success (all checks passed / matrix embeddable);
//! 1 — a check failed or the matrix is not embeddable; 2 — usage, parse or
//! runtime error. Diagnostics go to stderr, controlled by `MARKOVFLOW_LOG`
//! (`error`, `warn`, `info`, `debug`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use markovflow::algebra::{extremal_vertices, EqualInputGenerator, EqualInputMatrix, ParamVector};
use markovflow::flows::{bch_log, ei_principal_log};
use markovflow::oracles::{dense_expm, dense_logm_principal};
use markovflow::scenario;
use markovflow::{dense, log_warn};

#[derive(Parser)]
#[command(
    name = "markovflow",
    about = "Closed-form time-inhomogeneous Markov flows of equal-input type, \
             with principal logarithms, embeddability verdicts, and numeric oracles",
    disable_version_flag = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: compute the flow, run its checks, emit reports
    Solve {
        /// scenario JSON file
        scenario: PathBuf,
        /// write the CSV report here (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write a JSON report here
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a scenario's checks only; exit code carries the verdict
    Verify {
        /// scenario JSON file
        scenario: PathBuf,
    },
    /// Equal-input BCH: the principal logarithm of exp(Q_x)·exp(Q_y)
    Bch {
        #[arg(long)]
        dim: usize,
        /// comma-separated parameter vector of Q_x
        #[arg(long)]
        x: String,
        /// comma-separated parameter vector of Q_y
        #[arg(long)]
        y: String,
    },
    /// Homogeneous-embeddability verdict for a Markov matrix file
    Embed {
        /// plain-text matrix: first line d, then d rows of d reals
        #[arg(long)]
        matrix: PathBuf,
    },
    /// The d+2 extremal equal-input Markov matrices
    Vertices {
        #[arg(long)]
        dim: usize,
    },
    /// Print the version
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("markovflow: error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> markovflow::Result<ExitCode> {
    match command {
        Command::Solve {
            scenario,
            out,
            json,
        } => {
            let text = std::fs::read_to_string(&scenario)?;
            let parsed = scenario::parse_scenario(&text)
                .map_err(|e| e.context(format!("scenario {}", scenario.display())))?;
            let report = scenario::run(&parsed)?;
            let csv = report.to_csv();
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            if let Some(path) = json {
                std::fs::write(path, report.to_json_pretty()?)?;
            }
            if !report.passed {
                log_warn!("scenario '{}': one or more checks failed", report.scenario);
            }
            Ok(exit_for(report.passed))
        }
        Command::Verify { scenario } => {
            let text = std::fs::read_to_string(&scenario)?;
            let parsed = scenario::parse_scenario(&text)
                .map_err(|e| e.context(format!("scenario {}", scenario.display())))?;
            let report = scenario::run(&parsed)?;
            print!("{}", report.verify_lines());
            Ok(exit_for(report.passed))
        }
        Command::Bch { dim, x, y } => {
            let qx = EqualInputGenerator::new(parse_params(dim, &x)?);
            let qy = EqualInputGenerator::new(parse_params(dim, &y)?);
            let log = bch_log(&qx, &qy)?;
            println!("params: {}", join_floats(log.params.entries()));
            println!("summatory: {}", log.params.summatory());
            print_matrix("dense", &log.densify());
            let residual = dense::max_abs_diff(
                &dense_expm(&log.densify()),
                &(dense_expm(&qx.densify()) * dense_expm(&qy.densify())),
            );
            println!("exp-product residual: {residual:e}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Embed { matrix } => {
            let m = read_matrix_file(&matrix)?;
            Ok(exit_for(embed_verdict(&m)?))
        }
        Command::Vertices { dim } => {
            for (i, v) in extremal_vertices(dim)?.iter().enumerate() {
                println!(
                    "vertex {i}: params {} (x = {})",
                    join_floats(v.params.entries()),
                    v.summatory()
                );
                print_matrix("", &v.densify());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Version => {
            println!("markovflow {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_for(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_params(dim: usize, text: &str) -> markovflow::Result<ParamVector> {
    let entries: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let entries = entries.map_err(|e| markovflow::Error::SchemaError {
        path: "--x/--y".into(),
        message: format!("{e}"),
    })?;
    if entries.len() != dim {
        return Err(markovflow::Error::DimensionMismatch {
            left: entries.len(),
            right: dim,
        });
    }
    ParamVector::new(entries)
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn print_matrix(label: &str, m: &DMatrix<f64>) {
    if !label.is_empty() {
        println!("{label}:");
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        println!("  {}", row.join(" "));
    }
}

/// Matrix file format: first line the dimension d, then d lines of d
/// space-separated reals.
fn read_matrix_file(path: &PathBuf) -> markovflow::Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let d: usize = lines
        .next()
        .ok_or_else(|| markovflow::Error::Io("empty matrix file".into()))?
        .trim()
        .parse()
        .map_err(|e| markovflow::Error::Io(format!("first line must be the dimension: {e}")))?;
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        let line = lines
            .next()
            .ok_or_else(|| markovflow::Error::Io(format!("missing matrix row {i}")))?;
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(|s| s.parse::<f64>()).collect();
        let row = row.map_err(|e| markovflow::Error::Io(format!("row {i}: {e}")))?;
        if row.len() != d {
            return Err(markovflow::Error::Io(format!(
                "row {i} has {} entries, expected {d}",
                row.len()
            )));
        }
        entries.extend(row);
    }
    dense::from_row_major(d, &entries)
}

/// Prints the embeddability analysis; returns whether the matrix is
/// homogeneously embeddable by the route that applies.
fn embed_verdict(m: &DMatrix<f64>) -> markovflow::Result<bool> {
    let d = m.nrows();
    let row_residual = dense::row_sum_residual(m, 1.0);
    println!("dimension: {d}");
    println!("row-sum residual: {row_residual:e}");
    let is_markov_shape = row_residual <= 1e-10 && m.iter().all(|&v| v >= -1e-12);
    println!("markov: {is_markov_shape}");

    match EqualInputMatrix::fit_dense(m) {
        Ok((fit, residual)) if residual <= 1e-10 => {
            println!("equal-input: true (fit residual {residual:e})");
            println!("params: {}", join_floats(fit.params.entries()));
            println!("summatory x: {}", fit.summatory());
            match ei_principal_log(&fit) {
                Ok((r, embeddable)) => {
                    println!(
                        "principal log is equal-input with params: {}",
                        join_floats(r.params.entries())
                    );
                    print_matrix("generator", &r.densify());
                    println!("embeddable: {embeddable}");
                    Ok(embeddable)
                }
                Err(e) => {
                    println!("principal log unavailable: {e}");
                    println!("embeddable: false");
                    Ok(false)
                }
            }
        }
        _ => {
            println!("equal-input: false");
            match dense_logm_principal(m) {
                Ok(log) => {
                    print_matrix("principal log", &log);
                    let generator = dense::row_sum_residual(&log, 0.0) <= 1e-8
                        && (0..d).all(|i| (0..d).all(|j| i == j || log[(i, j)] >= -1e-10));
                    println!("principal log is a Markov generator: {generator}");
                    println!("embeddable (principal-log route): {generator}");
                    Ok(generator)
                }
                Err(e) => {
                    println!("principal log unavailable: {e}");
                    println!("embeddable (principal-log route): false");
                    Ok(false)
                }
            }
        }
    }
}
