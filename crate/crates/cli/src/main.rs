//! `kerrsim` command-line experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod experiments;
mod spec;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use experiments::Table;
use spec::{BasisArg, Command, ExperimentSpec, Format, Overrides, QuadratureArg, SpecFile};

const SCHEMA_VERSION: u32 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorKind {
    Usage,
    Numerical,
    Io,
    ValidationFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Numerical, message: message.into() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError { kind: ErrorKind::Io, message: format!("{}: {e}", path.display()) }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Numerical | ErrorKind::ValidationFailed => EXIT_NUMERICAL,
            ErrorKind::Io => 1,
        }
    }
}

impl From<kerrsim::Error> for CliError {
    fn from(e: kerrsim::Error) -> Self {
        let mut root = &e;
        while let kerrsim::Error::TrialFailed { source, .. } = root {
            root = source;
        }
        match root {
            kerrsim::Error::InvalidInput(_) | kerrsim::Error::QubitOutOfRange { .. } => CliError::usage(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerrsim", version, about = "Weak cross-Kerr photonic gate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    args: Args,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// QND photon-presence detector error rate.
    Detector,
    /// Parity gate herald error and conditional output states.
    Parity,
    /// Bell-state analyzer confusion matrix.
    Bell,
    /// CNOT truth table and entangling fidelity.
    Cnot,
    /// Required probe amplitude over a range of couplings.
    Sweep,
    /// Cross-check the branch engine against the Fock-space oracle.
    Validate,
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Probe amplitude α (real).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Cross-Kerr phase θ; for `sweep` a range `lo:hi:step`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Number of trials (per input state where applicable); accepts `1e6`.
    #[arg(long, global = true)]
    trials: Option<String>,
    /// Master seed [default: $KERRSIM_SEED, else 1].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Gaussian homodyne noise added to each reading.
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON file with the same fields; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; never changes the numbers.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Two-qubit input for `parity`/`cnot`: letters from HVDARL or phi±/psi±.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Parity gate basis.
    #[arg(long, global = true, value_enum)]
    basis: Option<BasisArg>,
    /// Detector readout quadrature.
    #[arg(long, global = true, value_enum)]
    quadrature: Option<QuadratureArg>,
    /// Target peak separation for `sweep`.
    #[arg(long, global = true)]
    target_xd: Option<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    started_at_unix_s: f64,
    wall_time_s: f64,
    jobs: Option<usize>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Report<'a> {
    schema_version: u32,
    spec: &'a ExperimentSpec,
    result: serde_json::Value,
    metadata: Metadata,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a CliError,
    #[serde(rename = "exitCode")]
    exit_code: u8,
}

fn write_csv(table: &Table, sink: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let command = match cli.command {
        Cmd::Detector => Command::Detector,
        Cmd::Parity => Command::Parity,
        Cmd::Bell => Command::Bell,
        Cmd::Cnot => Command::Cnot,
        Cmd::Sweep => Command::Sweep,
        Cmd::Validate => Command::Validate,
    };
    let a = cli.args;
    if a.jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let file = match &a.config {
        Some(p) => SpecFile::load(p)?,
        None => SpecFile::default(),
    };
    let flags = Overrides {
        alpha: a.alpha,
        theta: a.theta,
        noise_sigma: a.noise_sigma,
        trials: a.trials,
        seed: a.seed,
        input: a.input,
        basis: a.basis,
        quadrature: a.quadrature,
        target_xd: a.target_xd,
        out: a.out,
        format: a.format,
    };
    let spec = spec::resolve(command, file, flags)?;

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let outcome = experiments::run(&spec, a.jobs)?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        spec: &spec,
        result: outcome.result,
        metadata: Metadata {
            tool: "kerrsim",
            version: env!("CARGO_PKG_VERSION"),
            started_at_unix_s: started,
            wall_time_s: clock.elapsed().as_secs_f64(),
            jobs: a.jobs,
        },
    };
    let mut json = serde_json::to_vec_pretty(&report).expect("report is serializable");
    json.push(b'\n');

    match (spec.format, &spec.out) {
        (Format::Json, Some(path)) => write_file(path, &json)?,
        (Format::Json, None) => std::io::stdout().write_all(&json).map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
        (Format::Csv, Some(path)) => {
            let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            write_csv(&outcome.table, f).map_err(|e| CliError::io(path, e))?;
            // The full report travels next to the table.
            let sidecar = path.with_extension("json");
            if sidecar != *path {
                write_file(&sidecar, &json)?;
            }
        }
        (Format::Csv, None) => write_csv(&outcome.table, std::io::stdout()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }

    if outcome.passed == Some(false) {
        return Err(CliError {
            kind: ErrorKind::ValidationFailed,
            message: "branch engine and Fock oracle disagree beyond tolerance".into(),
        });
    }
    Ok(())
}

fn fail(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let body = ErrorReport { error: err, exit_code: code };
    eprintln!("{}", serde_json::to_string(&body).expect("error is serializable"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(EXIT_USAGE)
                } else {
                    ExitCode::SUCCESS
                };
            }
            return fail(&CliError::usage(e.to_string().trim().to_string()));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
