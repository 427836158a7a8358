//! X-quadrature homodyne measurement of a probe mode.
//!
//! Quadratures use the `X = a + a†` scaling, so a coherent state `|α⟩` yields a
//! unit-variance Gaussian centred at `2 Re α`. The position-representation
//! kernel carries the phase `Im α · (x − Re α)`; projection keeps that phase,
//! which is what the gates strip off by feed-forward.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid_state::{coherent_overlap, HybridState, ProbeId};

/// Default grid step for densities and inverse-CDF sampling.
pub const DEFAULT_STEP: f64 = 1e-2;
/// Default grid margin, in standard deviations, beyond the extreme peak positions.
pub const DEFAULT_MARGIN: f64 = 10.0;
/// Post-projection densities below this are reported as impossible outcomes.
const IMPOSSIBLE_NORM: f64 = 1e-150;
/// Bound on neglected interference mass when sampling a state as a Gaussian mixture.
const MIXTURE_TOLERANCE: f64 = 1e-15;

/// `(2π)^{-1/4}`
fn kernel_prefactor() -> f64 {
    (2.0 * PI).powf(-0.25)
}

/// `⟨x|α⟩ = (2π)^{-1/4} exp(−(x − 2Re α)²/4) · exp(i Im α (x − Re α))`.
pub fn position_kernel(x: f64, alpha: Complex64) -> Complex64 {
    let mag = kernel_prefactor() * (-0.25 * (x - 2.0 * alpha.re).powi(2)).exp();
    if alpha.im == 0.0 {
        return Complex64::new(mag, 0.0);
    }
    Complex64::from_polar(mag, kernel_phase_raw(x, alpha))
}

fn kernel_phase_raw(x: f64, alpha: Complex64) -> f64 {
    alpha.im * (x - alpha.re)
}

/// Phase of `⟨x|α⟩`, reduced to `[0, 2π)`.
pub fn kernel_phase(x: f64, alpha: Complex64) -> f64 {
    reduce_phase(kernel_phase_raw(x, alpha))
}

pub fn reduce_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Two-outcome herald of a parity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Midpoint `X₀ = α(1 + cos θ)` between the peaks at `2α` and `2α cos θ`.
pub fn peak_midpoint(alpha: f64, theta: f64) -> f64 {
    alpha * (1.0 + theta.cos())
}

/// Peak separation `X_d = 2α(1 − cos θ)`, evaluated as `4α sin²(θ/2)`.
pub fn peak_separation(alpha: f64, theta: f64) -> f64 {
    4.0 * alpha * (0.5 * theta).sin().powi(2)
}

/// Even iff `x ≥ X₀`; ties go to even.
pub fn threshold_classify(x: f64, alpha: f64, theta: f64) -> Parity {
    if x >= peak_midpoint(alpha, theta) {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// One homodyne measurement as seen by the classical controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub probe: ProbeId,
    /// Reading after detector noise; this is what classification and feed-forward see.
    pub x: f64,
    /// Feed-forward phase derived from `x`, in `[0, 2π)`.
    pub phi: f64,
    pub noise_sigma: f64,
}

/// Uniform evaluation grid `start + i·step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    pub fn spanning(lo: f64, hi: f64, step: f64) -> Self {
        let len = ((hi - lo) / step).ceil() as usize + 1;
        Grid { start: lo, step, len }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    pub fn end(&self) -> f64 {
        self.point(self.len.saturating_sub(1))
    }
}

/// Outcome density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl MeasurementDensity {
    /// Riemann sum `Σ p(x)·step`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.step
    }

    pub fn mean(&self) -> f64 {
        self.grid.points().zip(&self.values).map(|(x, p)| x * p).sum::<f64>() * self.grid.step
            / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.grid
            .points()
            .zip(&self.values)
            .map(|(x, p)| (x - m).powi(2) * p)
            .sum::<f64>()
            * self.grid.step
            / self.integral()
    }

    /// Probability mass in `[lo, hi)` by trapezoid integration over grid cells.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for i in 0..g.len.saturating_sub(1) {
            let (a, b) = (g.point(i), g.point(i + 1));
            let (ca, cb) = (a.max(lo), b.min(hi));
            if cb <= ca {
                continue;
            }
            let pa = self.values[i];
            let pb = self.values[i + 1];
            let interp = |x: f64| pa + (pb - pa) * (x - a) / g.step;
            acc += 0.5 * (interp(ca) + interp(cb)) * (cb - ca);
        }
        acc
    }
}

/// One interference term `c_ij · conj(⟨x|αᵢ⟩)⟨x|αⱼ⟩` of the Born density.
struct DensityTerm {
    coeff: Complex64,
    ai: Complex64,
    aj: Complex64,
}

/// Born-density terms for `probe`: other probes are folded in through their overlaps.
fn density_terms(state: &HybridState, slot: usize) -> Vec<DensityTerm> {
    let branches = state.branches();
    let mut terms = Vec::new();
    for (i, a) in branches.iter().enumerate() {
        for (j, b) in branches.iter().enumerate() {
            if a.label() != b.label() {
                continue;
            }
            let mut coeff = a.weight().conj() * b.weight();
            for (k, (x, y)) in a.amps().iter().zip(b.amps()).enumerate() {
                if k != slot {
                    coeff *= coherent_overlap(*x, *y);
                }
            }
            if i == j || coeff.norm() > 0.0 {
                terms.push(DensityTerm { coeff, ai: a.amps()[slot], aj: b.amps()[slot] });
            }
        }
    }
    terms
}

fn eval_terms(terms: &[DensityTerm], x: f64) -> f64 {
    terms
        .iter()
        .map(|t| (t.coeff * position_kernel(x, t.ai).conj() * position_kernel(x, t.aj)).re)
        .sum::<f64>()
        .max(0.0)
}

/// Default grid: `[min mean − 10, max mean + 10]` with step `10⁻²`.
pub fn default_grid(state: &HybridState, probe: ProbeId) -> Result<Grid> {
    let slot = state.probe_slot(probe)?;
    let (lo, hi) = state.branches().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        let m = 2.0 * b.amps()[slot].re;
        (lo.min(m), hi.max(m))
    });
    if !lo.is_finite() {
        return Err(Error::invalid("state has no branches"));
    }
    Ok(Grid::spanning(lo - DEFAULT_MARGIN, hi + DEFAULT_MARGIN, DEFAULT_STEP))
}

/// Born density of an X measurement of `probe` on the default grid.
pub fn density(state: &HybridState, probe: ProbeId) -> Result<MeasurementDensity> {
    let grid = default_grid(state, probe)?;
    density_on(state, probe, grid)
}

pub fn density_on(state: &HybridState, probe: ProbeId, grid: Grid) -> Result<MeasurementDensity> {
    let slot = state.probe_slot(probe)?;
    let terms = density_terms(state, slot);
    let values = grid.points().map(|x| eval_terms(&terms, x)).collect();
    Ok(MeasurementDensity { grid, values })
}

/// Point evaluation of the Born density.
pub fn density_at(state: &HybridState, probe: ProbeId, x: f64) -> Result<f64> {
    let slot = state.probe_slot(probe)?;
    Ok(eval_terms(&density_terms(state, slot), x))
}

/// Mixture components `(weight, mean)` if no branch interferes with another in
/// the measured quadrature.
fn mixture_components(state: &HybridState, slot: usize) -> Option<Vec<(f64, f64)>> {
    let branches = state.branches();
    for (i, a) in branches.iter().enumerate() {
        for b in &branches[i + 1..] {
            if a.label() != b.label() {
                continue;
            }
            let mut coeff = a.weight().conj() * b.weight();
            for (k, (x, y)) in a.amps().iter().zip(b.amps()).enumerate() {
                if k != slot {
                    coeff *= coherent_overlap(*x, *y);
                }
            }
            // ∫|⟨x|a⟩⟨x|b⟩| dx = exp(−(Re a − Re b)²/2)
            let dr = a.amps()[slot].re - b.amps()[slot].re;
            if coeff.norm() * (-0.5 * dr * dr).exp() > MIXTURE_TOLERANCE {
                return None;
            }
        }
    }
    Some(branches.iter().map(|b| (b.weight().norm_sqr(), 2.0 * b.amps()[slot].re)).collect())
}

/// Draws a true quadrature value (no detector noise).
fn sample_exact<R: Rng + ?Sized>(state: &HybridState, slot: usize, probe: ProbeId, rng: &mut R) -> Result<f64> {
    if let Some(components) = mixture_components(state, slot) {
        let total: f64 = components.iter().map(|c| c.0).sum();
        let mut u = rng.random::<f64>() * total;
        let mut mean = components.last().map(|c| c.1).unwrap_or(0.0);
        for &(w, m) in &components {
            if u < w {
                mean = m;
                break;
            }
            u -= w;
        }
        let z: f64 = StandardNormal.sample(rng);
        return Ok(mean + z);
    }
    sample_from_grid(&density(state, probe)?, rng)
}

/// Inverse-CDF sampling on a density grid with linear interpolation inside cells.
pub fn sample_from_grid<R: Rng + ?Sized>(d: &MeasurementDensity, rng: &mut R) -> Result<f64> {
    let n = d.values.len();
    if n < 2 {
        return Err(Error::invalid("density grid too small to sample"));
    }
    let mut cdf = Vec::with_capacity(n);
    cdf.push(0.0);
    for i in 1..n {
        let c = cdf[i - 1] + 0.5 * (d.values[i - 1] + d.values[i]) * d.grid.step;
        cdf.push(c);
    }
    let total = cdf[n - 1];
    if !(total > 0.0) {
        return Err(Error::invalid("density has no mass on its grid"));
    }
    let u = rng.random::<f64>() * total;
    let k = cdf.partition_point(|&c| c <= u).clamp(1, n - 1);
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
    Ok(d.grid.point(k - 1) + frac * d.grid.step)
}

/// Draws an X reading of `probe`: the Born density convolved with `N(0, noise_sigma²)`.
///
/// States whose branches do not interfere in the measured quadrature are
/// sampled exactly as a Gaussian mixture; all others by inverse CDF on the
/// default density grid.
pub fn sample<R: Rng + ?Sized>(
    state: &HybridState,
    probe: ProbeId,
    rng: &mut R,
    noise_sigma: f64,
) -> Result<f64> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma must be ≥ 0, got {noise_sigma}")));
    }
    let slot = state.probe_slot(probe)?;
    let x = sample_exact(state, slot, probe, rng)?;
    if noise_sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        Ok(x + noise_sigma * z)
    } else {
        Ok(x)
    }
}

/// Projects `probe` onto the quadrature eigenstate `|x⟩` and removes it.
///
/// Each weight is multiplied by the full complex kernel `⟨x|αᵢ⟩`; magnitudes
/// are rescaled in log space so that far-tail outcomes stay representable.
pub fn project(state: &HybridState, probe: ProbeId, x: f64) -> Result<HybridState> {
    let slot = state.probe_slot(probe)?;
    if !x.is_finite() {
        return Err(Error::invalid(format!("non-finite quadrature value {x}")));
    }
    let logs: Vec<f64> = state
        .branches()
        .iter()
        .map(|b| b.weight().norm().ln() - 0.25 * (x - 2.0 * b.amps()[slot].re).powi(2))
        .collect();
    let scale = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Err(Error::ImpossibleOutcome { x });
    }
    let weights = state
        .branches()
        .iter()
        .zip(&logs)
        .map(|(b, &l)| {
            let w = b.weight();
            let unit = if w.norm() > 0.0 { w / w.norm() } else { Complex64::new(0.0, 0.0) };
            let a = b.amps()[slot];
            let phase = if a.im == 0.0 { Complex64::new(1.0, 0.0) } else { Complex64::cis(kernel_phase_raw(x, a)) };
            unit * phase * (l - scale).exp()
        })
        .collect();
    let projected = state.drop_probe_with_weights(slot, weights);
    let scaled_norm = projected.norm();
    let log_norm = 2.0 * (scale + kernel_prefactor().ln()) + scaled_norm.ln();
    if !(scaled_norm > 0.0) || log_norm < IMPOSSIBLE_NORM.ln() {
        return Err(Error::ImpossibleOutcome { x });
    }
    projected.renormalized()
}
