//! Closed-form error and resource model, fidelities, and the reproducible
//! Monte Carlo harness used to check the model against the simulator.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{
    parity_gate, qnd_presence_detect_in, Basis, GateConfig, Quadrature, Readout,
};
use crate::homodyne::{peak_midpoint, peak_separation, Parity};
use crate::hybrid_state::{HybridState, QubitId, QubitSpec};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// `½ Erfc(z)`
pub fn half_erfc(z: f64) -> f64 {
    0.5 * libm::erfc(z)
}

/// Analytic quantities derived from `(α, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub alpha: f64,
    pub theta: f64,
    /// `2α sin θ`
    pub snr: f64,
    /// `α(1 + cos θ)`
    pub x0: f64,
    /// `2α(1 − cos θ)`
    pub xd: f64,
    /// `½ Erfc(α sin θ/√2)`, the photon-number detector read out in Y.
    pub p_err_detector: f64,
    /// `½ Erfc(X_d/(2√2))`
    pub p_err_parity: f64,
}

pub fn error_model(alpha: f64, theta: f64) -> Result<ErrorModel> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::invalid(format!("theta must lie in (0, π/2), got {theta}")));
    }
    let xd = peak_separation(alpha, theta);
    Ok(ErrorModel {
        alpha,
        theta,
        snr: 2.0 * alpha * theta.sin(),
        x0: peak_midpoint(alpha, theta),
        xd,
        p_err_detector: half_erfc(alpha * theta.sin() / SQRT_2),
        p_err_parity: half_erfc(xd / (2.0 * SQRT_2)),
    })
}

/// Probe amplitude needed to reach a target peak separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRequirement {
    pub theta: f64,
    pub target_xd: f64,
    pub alpha: f64,
    /// Mean probe photon number `α²`.
    pub photon_number: f64,
}

/// Smallest `α` with `2α(1 − cos θ) ≥ target_xd`. Accepts `θ ∈ (0, π/2]`.
pub fn required_alpha(theta: f64, target_xd: f64) -> Result<AlphaRequirement> {
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(Error::invalid(format!("theta must lie in (0, π/2], got {theta}")));
    }
    if !(target_xd > 0.0) || !target_xd.is_finite() {
        return Err(Error::invalid(format!("target X_d must be positive, got {target_xd}")));
    }
    let mut alpha = target_xd / peak_separation(1.0, theta);
    while peak_separation(alpha, theta) < target_xd {
        alpha = alpha.next_up();
    }
    Ok(AlphaRequirement { theta, target_xd, alpha, photon_number: alpha * alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityValue {
    pub value: f64,
    pub reference: String,
}

/// `|⟨reference|state⟩|²` for normalized states.
pub fn fidelity(state: &HybridState, reference: &HybridState) -> Result<FidelityValue> {
    let overlap = reference.inner(state)?;
    Ok(FidelityValue {
        value: overlap.norm_sqr().clamp(0.0, 1.0),
        reference: format!(
            "{}-qubit reference with {} branches",
            reference.register_size(),
            reference.branches().len()
        ),
    })
}

/// Wilson score interval at 95% for `k` events in `n` trials.
pub fn wilson95(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// `|k − np| ≤ nsigma·√(np(1−p))`
pub fn within_binomial_sigma(k: u64, n: u64, p: f64, nsigma: f64) -> bool {
    let n = n as f64;
    let sd = (n * p * (1.0 - p)).sqrt();
    (k as f64 - n * p).abs() <= nsigma * sd
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`; independent of scheduling.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(master: u64, index: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, index))
}

/// One Bernoulli experiment: returns `true` when the counted event occurs.
pub trait Experiment: Sync {
    fn trial(&self, rng: &mut TrialRng) -> Result<bool>;
}

impl<F> Experiment for F
where
    F: Fn(&mut TrialRng) -> Result<bool> + Sync,
{
    fn trial(&self, rng: &mut TrialRng) -> Result<bool> {
        self(rng)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    /// Number of trials in which the counted event occurred.
    pub successes: u64,
    pub point_estimate: f64,
    pub wilson95: (f64, f64),
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Equality ignores wall time.
impl PartialEq for MonteCarloReport {
    fn eq(&self, other: &Self) -> bool {
        self.trials == other.trials
            && self.successes == other.successes
            && self.point_estimate.to_bits() == other.point_estimate.to_bits()
            && self.wilson95.0.to_bits() == other.wilson95.0.to_bits()
            && self.wilson95.1.to_bits() == other.wilson95.1.to_bits()
            && self.seed == other.seed
    }
}

impl MonteCarloReport {
    pub fn brackets(&self, p: f64) -> bool {
        self.wilson95.0 <= p && p <= self.wilson95.1
    }
}

/// Runs `trials` independent trials, each on its own stream derived from
/// `(master_seed, index)`. `jobs` caps the worker count; the report does not
/// depend on it. The first failing trial (lowest index) aborts the run.
pub fn run_trials<E: Experiment + ?Sized>(
    experiment: &E,
    trials: u64,
    master_seed: u64,
    jobs: Option<usize>,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let start = Instant::now();
    let body = || {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(master_seed, i);
                experiment.trial(&mut rng).map(u64::from).map_err(|e| (i, e))
            })
            .reduce(
                || Ok(0u64),
                |a, b| match (a, b) {
                    (Ok(x), Ok(y)) => Ok(x + y),
                    (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
                    (Err(e1), Err(e2)) => Err(if e1.0 <= e2.0 { e1 } else { e2 }),
                },
            )
    };
    let outcome = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    };
    let successes =
        outcome.map_err(|(index, e)| Error::TrialFailed { index, source: Box::new(e) })?;
    Ok(MonteCarloReport {
        trials,
        successes,
        point_estimate: successes as f64 / trials as f64,
        wilson95: wilson95(successes, trials),
        seed: master_seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Parity herald error: each trial prepares a random computational-basis pair,
/// runs the parity gate and counts a herald that disagrees with the true parity.
#[derive(Debug, Clone, Copy)]
pub struct ParityErrorExperiment {
    pub cfg: GateConfig,
    pub basis: Basis,
}

impl Experiment for ParityErrorExperiment {
    fn trial(&self, rng: &mut TrialRng) -> Result<bool> {
        let bits: u8 = rng.random_range(0..4);
        let (b1, b2) = (bits & 1, bits >> 1);
        let spec = |b: u8| match (self.basis, b) {
            (Basis::Rectilinear, 0) => QubitSpec::h(),
            (Basis::Rectilinear, _) => QubitSpec::v(),
            (Basis::Diagonal, 0) => QubitSpec::diagonal(),
            (Basis::Diagonal, _) => QubitSpec::anti_diagonal(),
        };
        let input = HybridState::new_product_state(&[spec(b1), spec(b2)])?;
        let truth = if b1 == b2 { Parity::Even } else { Parity::Odd };
        let mut readout = Readout::random(rng);
        let (out, _) = parity_gate(&input, QubitId(0), QubitId(1), self.basis, &self.cfg, &mut readout)?;
        Ok(out.parity != truth)
    }
}

/// Photon-number detector error: each trial sends either vacuum or a single
/// photon of random polarization and counts a wrong presence verdict.
#[derive(Debug, Clone, Copy)]
pub struct DetectorErrorExperiment {
    pub cfg: GateConfig,
    pub quadrature: Quadrature,
}

impl Experiment for DetectorErrorExperiment {
    fn trial(&self, rng: &mut TrialRng) -> Result<bool> {
        let present = rng.random::<bool>();
        let spec = if present {
            let t: f64 = rng.random::<f64>() * FRAC_PI_2;
            QubitSpec::real(t.cos(), t.sin())
        } else {
            QubitSpec::Vacuum
        };
        let input = HybridState::new_product_state(&[spec])?;
        let mut readout = Readout::random(rng);
        let (det, _) = qnd_presence_detect_in(&input, QubitId(0), &self.cfg, self.quadrature, &mut readout)?;
        Ok(det.photon_present != present)
    }
}

impl DetectorErrorExperiment {
    /// Analytic misidentification probability for this readout.
    pub fn analytic(&self) -> f64 {
        match self.quadrature {
            Quadrature::Momentum => half_erfc(self.cfg.alpha() * self.cfg.theta().sin() / SQRT_2),
            Quadrature::Position => half_erfc(self.cfg.xd() / (2.0 * SQRT_2)),
        }
    }
}
