//! Experiment specification: flags, config file and defaults merged into one
//! serializable value that is embedded in every report.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "KERRSIM_SEED";
pub const DEFAULT_SEED: u64 = 1;
const MAX_TRIALS: f64 = 1e12;
/// The Fock oracle is only tractable for small probe amplitudes.
const MAX_ORACLE_ALPHA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Detector,
    Parity,
    Bell,
    Cnot,
    Sweep,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BasisArg {
    Rect,
    Diag,
}

/// `p` reads the momentum quadrature (the presence detector's natural
/// readout), `x` the position quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureArg {
    X,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ThetaRange {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(CliError::usage(format!("theta range must be lo:hi:step, got {s:?}")));
        };
        let num = |t: &str| {
            t.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad number {t:?} in theta range")))
        };
        let r = ThetaRange { lo: num(lo)?, hi: num(hi)?, step: num(step)? };
        if !(r.step > 0.0) || !(r.lo > 0.0) || r.hi < r.lo || !r.hi.is_finite() {
            return Err(CliError::usage(format!("theta range needs 0 < lo ≤ hi and step > 0, got {s:?}")));
        }
        Ok(r)
    }

    pub fn single(theta: f64) -> Self {
        ThetaRange { lo: theta, hi: theta, step: 1.0 }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentSpec {
    pub command: Command,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<ThetaRange>,
    pub noise_sigma: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_xd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentSpec {
    pub fn theta(&self) -> f64 {
        self.theta.expect("resolved spec carries theta for this command")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumOrText {
    Num(f64),
    Text(String),
}

/// Contents of a `--config` file; every field optional, flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpecFile {
    pub command: Option<Command>,
    pub alpha: Option<f64>,
    pub theta: Option<NumOrText>,
    #[serde(alias = "noise-sigma", alias = "noise_sigma")]
    pub noise_sigma: Option<f64>,
    pub trials: Option<NumOrText>,
    pub seed: Option<u64>,
    pub input: Option<String>,
    pub basis: Option<BasisArg>,
    pub quadrature: Option<QuadratureArg>,
    #[serde(alias = "target-xd", alias = "target_xd")]
    pub target_xd: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub theta: Option<String>,
    pub noise_sigma: Option<f64>,
    pub trials: Option<String>,
    pub seed: Option<u64>,
    pub input: Option<String>,
    pub basis: Option<BasisArg>,
    pub quadrature: Option<QuadratureArg>,
    pub target_xd: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Accepts plain and scientific notation (`100000`, `1e5`).
pub fn parse_trials(s: &str) -> Result<u64, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::usage(format!("invalid trial count {s:?}")))?;
    trials_from_f64(v)
}

fn trials_from_f64(v: f64) -> Result<u64, CliError> {
    if !(v >= 1.0) || v > MAX_TRIALS || v.fract() != 0.0 {
        return Err(CliError::usage(format!("trial count must be a whole number in [1, 1e12], got {v}")));
    }
    Ok(v as u64)
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn default_alpha_theta(cmd: Command) -> (f64, f64) {
    match cmd {
        Command::Validate => (2.0, 0.5),
        _ => (100.0, 0.3),
    }
}

pub fn resolve(command: Command, file: SpecFile, flags: Overrides) -> Result<ExperimentSpec, CliError> {
    if let Some(c) = file.command {
        if c != command {
            return Err(CliError::usage(format!("config is for {c:?}, but {command:?} was requested")));
        }
    }
    let (alpha0, theta0) = default_alpha_theta(command);
    let alpha = flags.alpha.or(file.alpha).unwrap_or(alpha0);
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CliError::usage(format!("alpha must be positive, got {alpha}")));
    }
    if command == Command::Validate && alpha > MAX_ORACLE_ALPHA {
        return Err(CliError::usage(format!("validate supports alpha ≤ {MAX_ORACLE_ALPHA}, got {alpha}")));
    }

    let theta_text = match (flags.theta, file.theta) {
        (Some(t), _) => Some(t),
        (None, Some(NumOrText::Text(t))) => Some(t),
        (None, Some(NumOrText::Num(v))) => Some(v.to_string()),
        (None, None) => None,
    };
    let (theta, theta_range) = match (command, theta_text) {
        (Command::Sweep, Some(t)) if t.contains(':') => (None, Some(ThetaRange::parse(&t)?)),
        (Command::Sweep, Some(t)) => (None, Some(ThetaRange::single(parse_theta(&t)?))),
        (Command::Sweep, None) => (None, Some(ThetaRange::parse("0.05:0.5:0.05")?)),
        (_, Some(t)) => (Some(parse_theta(&t)?), None),
        (_, None) => (Some(theta0), None),
    };

    let noise_sigma = flags.noise_sigma.or(file.noise_sigma).unwrap_or(0.0);
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(CliError::usage(format!("noise sigma must be ≥ 0, got {noise_sigma}")));
    }
    let trials = match (flags.trials, file.trials) {
        (Some(t), _) => parse_trials(&t)?,
        (None, Some(NumOrText::Num(v))) => trials_from_f64(v)?,
        (None, Some(NumOrText::Text(t))) => parse_trials(&t)?,
        (None, None) => 10_000,
    };
    let seed = match flags.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let target_xd = flags.target_xd.or(file.target_xd);
    if let Some(t) = target_xd {
        if !(t > 0.0) || !t.is_finite() {
            return Err(CliError::usage(format!("target X_d must be positive, got {t}")));
        }
    }
    let input = flags.input.or(file.input);
    let basis = flags.basis.or(file.basis);
    let quadrature = flags.quadrature.or(file.quadrature);

    let uses = |cmds: &[Command]| cmds.contains(&command);
    Ok(ExperimentSpec {
        command,
        alpha,
        theta,
        theta_range,
        noise_sigma,
        trials,
        seed,
        input: if uses(&[Command::Parity, Command::Cnot]) {
            Some(input.unwrap_or_else(|| if command == Command::Parity { "DD".into() } else { "DH".into() }))
        } else {
            input
        },
        basis: if command == Command::Parity { Some(basis.unwrap_or(BasisArg::Rect)) } else { basis },
        quadrature: if command == Command::Detector { Some(quadrature.unwrap_or(QuadratureArg::P)) } else { quadrature },
        target_xd: if command == Command::Sweep { Some(target_xd.unwrap_or(8.0)) } else { target_xd },
        out: flags.out.or(file.out),
        format: flags.format.or(file.format).unwrap_or(Format::Json),
    })
}

fn parse_theta(s: &str) -> Result<f64, CliError> {
    let t: f64 = s.trim().parse().map_err(|_| CliError::usage(format!("invalid theta {s:?}")))?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(CliError::usage(format!("theta must be positive, got {t}")));
    }
    Ok(t)
}
