//! Composite devices built from Kerr kicks, homodyne readout and feed-forward:
//! QND photon detectors, the two-qubit parity gate, the Bell analyzer built
//! from two parity gates, and the ancilla-assisted CNOT.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::{self, kernel_phase, peak_midpoint, peak_separation, HomodyneRecord, Parity};
use crate::hybrid_state::{HybridState, PolLabel, ProbeId, QubitId, QubitSpec, Unitary2};

/// Largest probe amplitude for which phase bookkeeping stays below 10⁻³ rad.
pub const MAX_ALPHA: f64 = 1e6;
/// Peak separation below which heralds are considered unreliable.
pub const MIN_SAFE_SEPARATION: f64 = 8.0;

/// Probe and detector settings shared by every device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    alpha: f64,
    theta: f64,
    noise_sigma: f64,
    seed: u64,
    xd: f64,
    low_separation: bool,
}

impl GateConfig {
    /// Real probe amplitude `alpha ∈ (0, 10⁶]`, Kerr angle `theta ∈ (0, π/2)`.
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= MAX_ALPHA) {
            return Err(Error::invalid(format!("alpha must lie in (0, {MAX_ALPHA:e}], got {alpha}")));
        }
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(Error::invalid(format!("theta must lie in (0, π/2), got {theta}")));
        }
        let xd = peak_separation(alpha, theta);
        Ok(GateConfig {
            alpha,
            theta,
            noise_sigma: 0.0,
            seed: 0,
            xd,
            low_separation: xd < MIN_SAFE_SEPARATION,
        })
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(Error::invalid(format!("noise sigma must be ≥ 0, got {noise_sigma}")));
        }
        self.noise_sigma = noise_sigma;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `X_d = 2α(1 − cos θ)`.
    pub fn xd(&self) -> f64 {
        self.xd
    }

    /// `X₀ = α(1 + cos θ)`.
    pub fn x0(&self) -> f64 {
        peak_midpoint(self.alpha, self.theta)
    }

    /// Set when `X_d < 8`.
    pub fn low_separation(&self) -> bool {
        self.low_separation
    }
}

/// Source of homodyne outcomes: a random stream, a queue of forced values, or both.
///
/// Forced values are consumed first and are taken as the true quadrature.
/// Detector noise is drawn from the random stream when one is attached and
/// omitted otherwise.
pub struct Readout<'a> {
    rng: Option<&'a mut dyn RngCore>,
    forced: VecDeque<f64>,
}

impl<'a> Readout<'a> {
    pub fn random(rng: &'a mut dyn RngCore) -> Self {
        Readout { rng: Some(rng), forced: VecDeque::new() }
    }

    pub fn forced<I: IntoIterator<Item = f64>>(xs: I) -> Readout<'static> {
        Readout { rng: None, forced: xs.into_iter().collect() }
    }

    pub fn forced_then_random<I: IntoIterator<Item = f64>>(xs: I, rng: &'a mut dyn RngCore) -> Self {
        Readout { rng: Some(rng), forced: xs.into_iter().collect() }
    }

    /// Returns `(true x, observed x)`.
    fn measure(&mut self, state: &HybridState, probe: ProbeId, noise_sigma: f64) -> Result<(f64, f64)> {
        let x = match self.forced.pop_front() {
            Some(x) => x,
            None => match self.rng.as_deref_mut() {
                Some(rng) => homodyne::sample(state, probe, rng, 0.0)?,
                None => return Err(Error::invalid("forced readout exhausted")),
            },
        };
        let observed = match self.rng.as_deref_mut() {
            Some(rng) if noise_sigma > 0.0 => {
                let z: f64 = StandardNormal.sample(rng);
                x + noise_sigma * z
            }
            _ => x,
        };
        Ok((x, observed))
    }

    fn uniform(&mut self) -> Option<f64> {
        self.rng.as_deref_mut().map(|r| (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
    }
}

/// Polarization basis of a parity gate's beam splitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `{H, V}`
    Rectilinear,
    /// `{H+V, H−V}`, the 45° beam splitter.
    Diagonal,
}

/// Which probe quadrature a detector reads out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// `X = a + a†`; presence shifts the mean from `2α` to `2α cos θ`.
    Position,
    /// `Y`, read as X after a −π/2 probe phase shift; presence shifts the mean
    /// from 0 to `2α sin θ`.
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CorrectionOp {
    /// `diag(1, e^{iφ})`
    Phase(f64),
    BitFlip,
    SignFlip,
}

/// A feed-forward operation applied by a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub qubit: QubitId,
    pub basis: Basis,
    pub op: CorrectionOp,
}

impl Correction {
    pub fn unitary(&self) -> Unitary2 {
        let u = match self.op {
            CorrectionOp::Phase(phi) => Unitary2::phase(phi),
            CorrectionOp::BitFlip => Unitary2::bit_flip(),
            CorrectionOp::SignFlip => Unitary2::sign_flip(),
        };
        match self.basis {
            Basis::Rectilinear => u,
            Basis::Diagonal => u.in_diagonal_basis(),
        }
    }

    fn apply(&self, state: &HybridState) -> Result<HybridState> {
        state.apply_1q(self.qubit, &self.unitary())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityOutcome {
    pub parity: Parity,
    pub basis: Basis,
    pub record: HomodyneRecord,
    /// Empty for even heralds.
    pub corrections: Vec<Correction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub photon_present: bool,
    /// Only set by polarization-resolving measurements.
    pub polarization: Option<PolLabel>,
    pub records: Vec<HomodyneRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] =
        [BellLabel::PhiPlus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PsiMinus];

    /// `(rectilinear parity, diagonal parity)` → label.
    pub fn from_parities(rect: Parity, diag: Parity) -> Self {
        match (rect, diag) {
            (Parity::Even, Parity::Even) => BellLabel::PhiPlus,
            (Parity::Even, Parity::Odd) => BellLabel::PhiMinus,
            (Parity::Odd, Parity::Even) => BellLabel::PsiPlus,
            (Parity::Odd, Parity::Odd) => BellLabel::PsiMinus,
        }
    }

    pub fn parities(self) -> (Parity, Parity) {
        match self {
            BellLabel::PhiPlus => (Parity::Even, Parity::Even),
            BellLabel::PhiMinus => (Parity::Even, Parity::Odd),
            BellLabel::PsiPlus => (Parity::Odd, Parity::Even),
            BellLabel::PsiMinus => (Parity::Odd, Parity::Odd),
        }
    }

    pub fn index(self) -> usize {
        match self {
            BellLabel::PhiPlus => 0,
            BellLabel::PhiMinus => 1,
            BellLabel::PsiPlus => 2,
            BellLabel::PsiMinus => 3,
        }
    }

    /// The Bell state itself on a fresh two-qubit register.
    pub fn state(self) -> HybridState {
        use PolLabel::{H, V};
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let (l0, l1, sign) = match self {
            BellLabel::PhiPlus => ([H, H], [V, V], 1.0),
            BellLabel::PhiMinus => ([H, H], [V, V], -1.0),
            BellLabel::PsiPlus => ([H, V], [V, H], 1.0),
            BellLabel::PsiMinus => ([H, V], [V, H], -1.0),
        };
        HybridState::from_terms(
            2,
            [(l0.to_vec(), Complex64::new(a, 0.0)), (l1.to_vec(), Complex64::new(sign * a, 0.0))],
        )
        .expect("Bell states are normalized")
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellLabel::PhiPlus => "Phi+",
            BellLabel::PhiMinus => "Phi-",
            BellLabel::PsiPlus => "Psi+",
            BellLabel::PsiMinus => "Psi-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellOutcome {
    pub label: BellLabel,
    pub rectilinear: ParityOutcome,
    pub diagonal: ParityOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnotOutcome {
    /// Control–ancilla (rectilinear) then ancilla–target (diagonal).
    pub parities: [ParityOutcome; 2],
    pub ancilla: DetectionOutcome,
    /// Whether the target received the final bit flip.
    pub target_flipped: bool,
}

fn require_photon(state: &HybridState, qubit: QubitId) -> Result<()> {
    state.check_qubit(qubit)?;
    if state.branches().iter().any(|b| b.label()[qubit.0] == PolLabel::Vac) {
        return Err(Error::invalid(format!("{qubit} has a vacuum component")));
    }
    Ok(())
}

fn probe_amplitude(cfg: &GateConfig) -> Complex64 {
    Complex64::new(cfg.alpha, 0.0)
}

/// Polarization-preserving presence detector: both rails of `qubit` kick one
/// shared probe by `+θ`, so the reading reveals the photon number but not its
/// polarization. Present iff `x < X₀`.
pub fn qnd_presence_detect(
    state: &HybridState,
    qubit: QubitId,
    cfg: &GateConfig,
    readout: &mut Readout<'_>,
) -> Result<(DetectionOutcome, HybridState)> {
    qnd_presence_detect_in(state, qubit, cfg, Quadrature::Position, readout)
}

/// Presence detector with a choice of probe quadrature.
///
/// With [`Quadrature::Momentum`] the threshold sits at `α sin θ`, midway
/// between the vacuum and one-photon means, giving misidentification
/// probability `½ Erfc(α sin θ/√2)`.
pub fn qnd_presence_detect_in(
    state: &HybridState,
    qubit: QubitId,
    cfg: &GateConfig,
    quadrature: Quadrature,
    readout: &mut Readout<'_>,
) -> Result<(DetectionOutcome, HybridState)> {
    state.check_qubit(qubit)?;
    let (s, probe) = state.allocate_probe(probe_amplitude(cfg));
    let s = s.conditional_kerr(qubit, PolLabel::H, probe, cfg.theta)?;
    let mut s = s.conditional_kerr(qubit, PolLabel::V, probe, cfg.theta)?;
    if quadrature == Quadrature::Momentum {
        s = s.rotate_probe(probe, -FRAC_PI_2)?;
    }
    let (x, observed) = readout.measure(&s, probe, cfg.noise_sigma)?;
    let post = homodyne::project(&s, probe, x)?;
    let (present, kicked) = match quadrature {
        Quadrature::Position => (observed < cfg.x0(), Complex64::from_polar(cfg.alpha, cfg.theta)),
        Quadrature::Momentum => (
            observed > cfg.alpha * cfg.theta.sin(),
            Complex64::from_polar(cfg.alpha, cfg.theta - FRAC_PI_2),
        ),
    };
    let record = HomodyneRecord {
        probe,
        x: observed,
        phi: kernel_phase(observed, kicked),
        noise_sigma: cfg.noise_sigma,
    };
    Ok((DetectionOutcome { photon_present: present, polarization: None, records: vec![record] }, post))
}

/// Polarization QND measurement: only the H rail kicks the probe, so the
/// reading sits near `2α cos θ` for H and `2α` for V.
///
/// The returned state is the exact post-homodyne state, which for a reliable
/// herald is collapsed onto the reported polarization.
pub fn qnd_polarization_measure(
    state: &HybridState,
    qubit: QubitId,
    cfg: &GateConfig,
    readout: &mut Readout<'_>,
) -> Result<(DetectionOutcome, HybridState)> {
    state.check_qubit(qubit)?;
    if state.branches().iter().all(|b| b.label()[qubit.0] == PolLabel::Vac) {
        return Err(Error::invalid(format!("{qubit} holds no photon")));
    }
    let (s, probe) = state.allocate_probe(probe_amplitude(cfg));
    let s = s.conditional_kerr(qubit, PolLabel::H, probe, cfg.theta)?;
    let (x, observed) = readout.measure(&s, probe, cfg.noise_sigma)?;
    let post = homodyne::project(&s, probe, x)?;
    let pol = match homodyne::threshold_classify(observed, cfg.alpha, cfg.theta) {
        Parity::Even => PolLabel::V,
        Parity::Odd => PolLabel::H,
    };
    let record = HomodyneRecord {
        probe,
        x: observed,
        phi: kernel_phase(observed, Complex64::from_polar(cfg.alpha, cfg.theta)),
        noise_sigma: cfg.noise_sigma,
    };
    Ok((DetectionOutcome { photon_present: true, polarization: Some(pol), records: vec![record] }, post))
}

/// Two-qubit parity gate.
///
/// `q1` kicks the probe by `+θ` and `q2` by `−θ` when carrying `H` (in the
/// chosen basis), so even pairs leave the probe at `α` and odd pairs at
/// `αe^{±iθ}`. An odd herald is followed by the phase feed-forward
/// `diag(1, e^{iφ})` on `q1` and `diag(1, e^{−iφ})` on `q2`, with `φ` the
/// kernel phase of `αe^{iθ}` at the observed reading.
pub fn parity_gate(
    state: &HybridState,
    q1: QubitId,
    q2: QubitId,
    basis: Basis,
    cfg: &GateConfig,
    readout: &mut Readout<'_>,
) -> Result<(ParityOutcome, HybridState)> {
    if q1 == q2 {
        return Err(Error::invalid("parity gate needs two distinct qubits"));
    }
    require_photon(state, q1)?;
    require_photon(state, q2)?;
    let hadamard = Unitary2::hadamard();
    let mut s = state.clone();
    if basis == Basis::Diagonal {
        s = s.apply_1q(q1, &hadamard)?.apply_1q(q2, &hadamard)?;
    }
    let (s, probe) = s.allocate_probe(probe_amplitude(cfg));
    let s = s.conditional_kerr(q1, PolLabel::H, probe, cfg.theta)?;
    let s = s.conditional_kerr(q2, PolLabel::H, probe, -cfg.theta)?;
    let (x, observed) = readout.measure(&s, probe, cfg.noise_sigma)?;
    let mut s = homodyne::project(&s, probe, x)?;
    let parity = homodyne::threshold_classify(observed, cfg.alpha, cfg.theta);
    let mut phi = 0.0;
    let mut corrections = Vec::new();
    if parity == Parity::Odd {
        phi = kernel_phase(observed, Complex64::from_polar(cfg.alpha, cfg.theta));
        // Applied in the rotated frame, so recorded in the gate's basis.
        s = s.apply_1q(q1, &Unitary2::phase(phi))?.apply_1q(q2, &Unitary2::phase(-phi))?;
        corrections.push(Correction { qubit: q1, basis, op: CorrectionOp::Phase(phi) });
        corrections.push(Correction {
            qubit: q2,
            basis,
            op: CorrectionOp::Phase(homodyne::reduce_phase(-phi)),
        });
    }
    if basis == Basis::Diagonal {
        s = s.apply_1q(q1, &hadamard)?.apply_1q(q2, &hadamard)?;
    }
    let record = HomodyneRecord { probe, x: observed, phi, noise_sigma: cfg.noise_sigma };
    Ok((ParityOutcome { parity, basis, record, corrections }, s))
}

/// Non-destructive Bell analyzer: a rectilinear parity gate followed by a
/// diagonal one, each with its own feed-forward.
pub fn bell_measure(
    state: &HybridState,
    q1: QubitId,
    q2: QubitId,
    cfg: &GateConfig,
    readout: &mut Readout<'_>,
) -> Result<(BellOutcome, HybridState)> {
    let (rect, s) = parity_gate(state, q1, q2, Basis::Rectilinear, cfg, readout)?;
    let (diag, s) = parity_gate(&s, q1, q2, Basis::Diagonal, cfg, readout)?;
    let label = BellLabel::from_parities(rect.parity, diag.parity);
    Ok((BellOutcome { label, rectilinear: rect, diagonal: diag }, s))
}

/// Removes a qubit after its QND readout. A residual superposition (left by an
/// unreliable herald) is resolved by a Born-rule draw, or by the dominant label
/// when no random stream is attached.
fn discard_qubit(state: &HybridState, qubit: QubitId, readout: &mut Readout<'_>) -> Result<HybridState> {
    if state.definite_label(qubit)?.is_some() {
        return Ok(state.remove_qubit(qubit)?.0);
    }
    let p_h = state.label_probability(qubit, PolLabel::H)?;
    let p_v = state.label_probability(qubit, PolLabel::V)?;
    let label = match readout.uniform() {
        Some(u) if u * (p_h + p_v) < p_h => PolLabel::H,
        Some(_) => PolLabel::V,
        None if p_h >= p_v => PolLabel::H,
        None => PolLabel::V,
    };
    Ok(state.postselect(qubit, label)?.remove_qubit(qubit)?.0)
}

/// CNOT from two parity gates and one ancilla prepared as `(|H⟩+|V⟩)/√2`.
///
/// 1. Rectilinear parity gate on (control, ancilla); odd ⇒ bit flip on the ancilla.
/// 2. Diagonal parity gate on (ancilla, target); odd ⇒ bit flip on the ancilla
///    in the diagonal basis and `|V⟩_c → −|V⟩_c` on the control.
/// 3. QND polarization readout of the ancilla; V ⇒ bit flip on the target.
///
/// The ancilla is appended to and removed from the register within the call.
pub fn cnot(
    state: &HybridState,
    control: QubitId,
    target: QubitId,
    cfg: &GateConfig,
    readout: &mut Readout<'_>,
) -> Result<(CnotOutcome, HybridState)> {
    if control == target {
        return Err(Error::invalid("control and target must differ"));
    }
    require_photon(state, control)?;
    require_photon(state, target)?;
    let (s, ancilla) = state.append_qubit(QubitSpec::diagonal())?;

    let (mut first, mut s) = parity_gate(&s, control, ancilla, Basis::Rectilinear, cfg, readout)?;
    if first.parity == Parity::Odd {
        let fix = Correction { qubit: ancilla, basis: Basis::Rectilinear, op: CorrectionOp::BitFlip };
        s = fix.apply(&s)?;
        first.corrections.push(fix);
    }

    let (mut second, mut s) = parity_gate(&s, ancilla, target, Basis::Diagonal, cfg, readout)?;
    if second.parity == Parity::Odd {
        let flip = Correction { qubit: ancilla, basis: Basis::Diagonal, op: CorrectionOp::BitFlip };
        let sign = Correction { qubit: control, basis: Basis::Rectilinear, op: CorrectionOp::SignFlip };
        s = sign.apply(&flip.apply(&s)?)?;
        second.corrections.push(flip);
        second.corrections.push(sign);
    }

    let (det, s) = qnd_polarization_measure(&s, ancilla, cfg, readout)?;
    let mut s = discard_qubit(&s, ancilla, readout)?;
    let target_flipped = det.polarization == Some(PolLabel::V);
    if target_flipped {
        s = s.apply_1q(target, &Unitary2::bit_flip())?;
    }
    Ok((CnotOutcome { parities: [first, second], ancilla: det, target_flipped }, s))
}
