//! Exact branch representation of photonic qubits entangled with coherent probes.
//!
//! A [`HybridState`] stores a finite superposition
//!
//! ```text
//! |Ψ⟩ = Σᵢ wᵢ |labelᵢ⟩ ⊗ₖ |αᵢₖ⟩
//! ```
//!
//! where every `labelᵢ` assigns one of `VAC`, `H`, `V` to each dual-rail mode of
//! the register and every live probe `k` holds a coherent state of amplitude
//! `αᵢₖ`. Branches are not orthogonal in general: two branches with the same
//! label overlap through the coherent-state inner product
//! `⟨α|β⟩ = exp(−|α|²/2 − |β|²/2 + α*β)`.
//!
//! The representation is closed under the operations the protocols need:
//! label-conditioned probe rotations (cross-Kerr interaction behind a
//! polarizing beam splitter), single-qubit unitaries on the `{H, V}` subspace,
//! and homodyne projection of a probe (see [`crate::homodyne`]).
//!
//! Every operation returns a new state.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that inputs and unitaries are normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-12;
/// Probe amplitudes closer than this (scaled by `max(1, |α|)`) are merged.
const MERGE_TOLERANCE: f64 = 1e-12;
/// Branches whose weight magnitude falls to or below this are dropped.
const DROP_THRESHOLD: f64 = 1e-15;

/// Occupation of one dual-rail photonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolLabel {
    /// No photon in the mode.
    Vac,
    H,
    V,
}

impl PolLabel {
    fn index(self) -> Option<usize> {
        match self {
            PolLabel::Vac => None,
            PolLabel::H => Some(0),
            PolLabel::V => Some(1),
        }
    }

    fn from_index(i: usize) -> Self {
        if i == 0 {
            PolLabel::H
        } else {
            PolLabel::V
        }
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolLabel::Vac => "VAC",
            PolLabel::H => "H",
            PolLabel::V => "V",
        })
    }
}

/// Index of a qubit in the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitId(pub usize);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Handle to a probe mode. Ids are never reused within one state lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProbeId(pub u32);

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Per-qubit input for [`HybridState::new_product_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitSpec {
    Vacuum,
    /// Amplitudes of `|H⟩` and `|V⟩`.
    Pol(Complex64, Complex64),
}

impl QubitSpec {
    pub fn h() -> Self {
        QubitSpec::Pol(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn v() -> Self {
        QubitSpec::Pol(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// `(|H⟩ + |V⟩)/√2`
    pub fn diagonal() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        QubitSpec::Pol(a, a)
    }

    /// `(|H⟩ − |V⟩)/√2`
    pub fn anti_diagonal() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        QubitSpec::Pol(Complex64::new(a, 0.0), Complex64::new(-a, 0.0))
    }

    pub fn real(h: f64, v: f64) -> Self {
        QubitSpec::Pol(Complex64::new(h, 0.0), Complex64::new(v, 0.0))
    }
}

/// One term of a [`HybridState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    label: Vec<PolLabel>,
    amps: Vec<Complex64>,
    weight: Complex64,
}

impl Branch {
    pub fn label(&self) -> &[PolLabel] {
        &self.label
    }

    /// Probe amplitudes, aligned with [`HybridState::probes`].
    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn weight(&self) -> Complex64 {
        self.weight
    }
}

/// A 2×2 unitary acting on the `{H, V}` subspace of one qubit. `VAC` is left untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    /// `m[row][col]`, index 0 = H, 1 = V.
    m: [[Complex64; 2]; 2],
}

impl Unitary2 {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let u = Unitary2 { m };
        let p = u.dagger().compose_unchecked(&u);
        let id = Unitary2::identity();
        for r in 0..2 {
            for c in 0..2 {
                if (p.m[r][c] - id.m[r][c]).norm() > UNITARY_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "matrix is not unitary: (U†U)[{r}][{c}] = {}",
                        p.m[r][c]
                    )));
                }
            }
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Unitary2 { m: [[o, z], [z, o]] }
    }

    /// Bit flip `H ↔ V`.
    pub fn bit_flip() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Unitary2 { m: [[z, o], [o, z]] }
    }

    /// Sign flip `|V⟩ → −|V⟩`.
    pub fn sign_flip() -> Self {
        Unitary2::phase(std::f64::consts::PI)
    }

    /// Maps `H → (H+V)/√2`, `V → (H−V)/√2`. Conjugating by it moves between the
    /// rectilinear and the 45° (diagonal) basis.
    pub fn hadamard() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Unitary2 { m: [[a, a], [a, -a]] }
    }

    /// `diag(1, e^{iφ})`
    pub fn phase(phi: f64) -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let p = if phi == std::f64::consts::PI {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::cis(phi)
        };
        Unitary2 { m: [[o, z], [z, p]] }
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    pub fn dagger(&self) -> Self {
        let m = self.m;
        Unitary2 {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Unitary2) -> Self {
        self.compose_unchecked(other)
    }

    fn compose_unchecked(&self, other: &Unitary2) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = self.m[r][0] * other.m[0][c] + self.m[r][1] * other.m[1][c];
            }
        }
        Unitary2 { m }
    }

    /// `H · self · H`, the same operation expressed in the diagonal basis.
    pub fn in_diagonal_basis(&self) -> Self {
        let h = Unitary2::hadamard();
        h.compose(self).compose(&h)
    }
}

/// Inner product of two coherent states, `⟨a|b⟩`.
pub fn coherent_overlap(a: Complex64, b: Complex64) -> Complex64 {
    let d = a - b;
    let im = (a.conj() * b).im;
    Complex64::from_polar((-0.5 * d.norm_sqr()).exp(), im)
}

fn amps_match(a: &[Complex64], b: &[Complex64]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let tol = MERGE_TOLERANCE * x.norm().max(1.0);
        (x.re - y.re).abs() <= tol && (x.im - y.im).abs() <= tol
    })
}

/// Superposition of [`Branch`]es over a fixed register and a set of live probes.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    register: usize,
    probes: Vec<ProbeId>,
    next_probe: u32,
    branches: Vec<Branch>,
}

impl HybridState {
    /// Product state of the given qubits with no probes.
    pub fn new_product_state(qubits: &[QubitSpec]) -> Result<Self> {
        let mut branches = vec![Branch {
            label: Vec::with_capacity(qubits.len()),
            amps: Vec::new(),
            weight: Complex64::new(1.0, 0.0),
        }];
        for (q, spec) in qubits.iter().enumerate() {
            let comps: Vec<(PolLabel, Complex64)> = match *spec {
                QubitSpec::Vacuum => vec![(PolLabel::Vac, Complex64::new(1.0, 0.0))],
                QubitSpec::Pol(h, v) => {
                    let n = h.norm_sqr() + v.norm_sqr();
                    if n == 0.0 || !n.is_finite() {
                        return Err(Error::invalid(format!("qubit {q} has zero norm")));
                    }
                    if (n - 1.0).abs() > NORM_TOLERANCE {
                        return Err(Error::invalid(format!(
                            "qubit {q} is not normalized (norm² = {n})"
                        )));
                    }
                    [(PolLabel::H, h), (PolLabel::V, v)]
                        .into_iter()
                        .filter(|(_, a)| *a != Complex64::new(0.0, 0.0))
                        .collect()
                }
            };
            branches = branches
                .into_iter()
                .flat_map(|b| {
                    comps.iter().map(move |&(l, a)| {
                        let mut label = b.label.clone();
                        label.push(l);
                        Branch { label, amps: Vec::new(), weight: b.weight * a }
                    })
                })
                .collect();
        }
        Ok(HybridState { register: qubits.len(), probes: Vec::new(), next_probe: 0, branches })
    }

    /// Arbitrary probe-free superposition of labels, normalized on construction.
    pub fn from_terms<I>(register: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<PolLabel>, Complex64)>,
    {
        let mut branches = Vec::new();
        for (label, weight) in terms {
            if label.len() != register {
                return Err(Error::invalid(format!(
                    "label of length {} in a register of {register}",
                    label.len()
                )));
            }
            branches.push(Branch { label, amps: Vec::new(), weight });
        }
        let state = HybridState { register, probes: Vec::new(), next_probe: 0, branches };
        state.with_branches(state.branches.clone()).renormalized()
    }

    /// General constructor: `terms` are `(label, probe amplitudes, weight)`, all
    /// with `probes` amplitudes. Fresh probe ids `0..probes` are returned.
    pub fn from_branches<I>(register: usize, probes: usize, terms: I) -> Result<(Self, Vec<ProbeId>)>
    where
        I: IntoIterator<Item = (Vec<PolLabel>, Vec<Complex64>, Complex64)>,
    {
        let mut branches = Vec::new();
        for (label, amps, weight) in terms {
            if label.len() != register || amps.len() != probes {
                return Err(Error::invalid("branch shape does not match register/probe count"));
            }
            branches.push(Branch { label, amps, weight });
        }
        let ids: Vec<ProbeId> = (0..probes as u32).map(ProbeId).collect();
        let state =
            HybridState { register, probes: ids.clone(), next_probe: probes as u32, branches: Vec::new() };
        Ok((state.with_branches(branches).renormalized()?, ids))
    }

    pub fn register_size(&self) -> usize {
        self.register
    }

    pub fn probes(&self) -> &[ProbeId] {
        &self.probes
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_live(&self, probe: ProbeId) -> bool {
        self.probes.contains(&probe)
    }

    pub(crate) fn probe_slot(&self, probe: ProbeId) -> Result<usize> {
        self.probes.iter().position(|&p| p == probe).ok_or(Error::UnknownProbe(probe))
    }

    pub(crate) fn check_qubit(&self, qubit: QubitId) -> Result<()> {
        if qubit.0 < self.register {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { qubit, size: self.register })
        }
    }

    /// Amplitude of `probe` in branch `branch`.
    pub fn amplitude(&self, branch: usize, probe: ProbeId) -> Option<Complex64> {
        let slot = self.probe_slot(probe).ok()?;
        self.branches.get(branch).map(|b| b.amps[slot])
    }

    /// Adds a probe in coherent state `alpha` to every branch.
    pub fn allocate_probe(&self, alpha: Complex64) -> (HybridState, ProbeId) {
        let id = ProbeId(self.next_probe);
        let mut out = self.clone();
        out.next_probe += 1;
        out.probes.push(id);
        for b in &mut out.branches {
            b.amps.push(alpha);
        }
        (out, id)
    }

    /// Rotates `probe` by `e^{iθ}` in every branch whose `qubit` carries `trigger`.
    ///
    /// This is the net action of PBS → cross-Kerr → PBS on a single-photon
    /// dual-rail qubit: the path mode selected by `trigger` holds one photon
    /// exactly when the qubit label equals `trigger`.
    pub fn conditional_kerr(
        &self,
        qubit: QubitId,
        trigger: PolLabel,
        probe: ProbeId,
        theta: f64,
    ) -> Result<HybridState> {
        self.check_qubit(qubit)?;
        if trigger == PolLabel::Vac {
            return Err(Error::invalid("the vacuum never triggers a Kerr phase"));
        }
        let slot = self.probe_slot(probe)?;
        let kick = Complex64::cis(theta);
        let mut branches = self.branches.clone();
        for b in &mut branches {
            if b.label[qubit.0] == trigger {
                b.amps[slot] *= kick;
            }
        }
        Ok(self.with_branches(branches))
    }

    /// Unconditional phase shifter on a probe, `|α⟩ → |α e^{iφ}⟩`.
    pub fn rotate_probe(&self, probe: ProbeId, phi: f64) -> Result<HybridState> {
        let slot = self.probe_slot(probe)?;
        let kick = Complex64::cis(phi);
        let mut branches = self.branches.clone();
        for b in &mut branches {
            b.amps[slot] *= kick;
        }
        Ok(self.with_branches(branches))
    }

    pub fn apply_1q(&self, qubit: QubitId, u: &Unitary2) -> Result<HybridState> {
        self.check_qubit(qubit)?;
        let mut branches = Vec::with_capacity(self.branches.len() * 2);
        for b in &self.branches {
            let Some(col) = b.label[qubit.0].index() else {
                branches.push(b.clone());
                continue;
            };
            for row in 0..2 {
                let coeff = u.m[row][col];
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut nb = b.clone();
                nb.label[qubit.0] = PolLabel::from_index(row);
                nb.weight *= coeff;
                branches.push(nb);
            }
        }
        Ok(self.with_branches(branches))
    }

    /// `⟨self|other⟩`. Both states must share register size and live probe set.
    pub fn inner(&self, other: &HybridState) -> Result<Complex64> {
        if self.register != other.register {
            return Err(Error::RegisterMismatch(format!(
                "{} vs {} qubits",
                self.register, other.register
            )));
        }
        // Align `other`'s probe slots to ours.
        if self.probes.len() != other.probes.len() {
            return Err(Error::RegisterMismatch("different live probe sets".into()));
        }
        let mut perm = Vec::with_capacity(self.probes.len());
        for p in &self.probes {
            match other.probes.iter().position(|q| q == p) {
                Some(i) => perm.push(i),
                None => return Err(Error::RegisterMismatch("different live probe sets".into())),
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.branches {
            for b in &other.branches {
                if a.label != b.label {
                    continue;
                }
                let mut term = a.weight.conj() * b.weight;
                for (k, &j) in perm.iter().enumerate() {
                    term *= coherent_overlap(a.amps[k], b.amps[j]);
                }
                acc += term;
            }
        }
        Ok(acc)
    }

    /// `⟨Ψ|Ψ⟩`.
    pub fn norm(&self) -> f64 {
        self.norm_of(&self.branches)
    }

    fn norm_of(&self, branches: &[Branch]) -> f64 {
        let mut acc = 0.0;
        for (i, a) in branches.iter().enumerate() {
            acc += a.weight.norm_sqr();
            for b in &branches[i + 1..] {
                if a.label != b.label {
                    continue;
                }
                let mut term = a.weight.conj() * b.weight;
                for (x, y) in a.amps.iter().zip(&b.amps) {
                    term *= coherent_overlap(*x, *y);
                }
                acc += 2.0 * term.re;
            }
        }
        acc
    }

    /// Appends a qubit to the register.
    pub fn append_qubit(&self, spec: QubitSpec) -> Result<(HybridState, QubitId)> {
        let single = HybridState::new_product_state(&[spec])?;
        let mut branches = Vec::with_capacity(self.branches.len() * single.branches.len());
        for b in &self.branches {
            for s in &single.branches {
                let mut nb = b.clone();
                nb.label.push(s.label[0]);
                nb.weight *= s.weight;
                branches.push(nb);
            }
        }
        let mut out = self.with_branches(branches);
        out.register += 1;
        Ok((out, QubitId(self.register)))
    }

    /// Label of `qubit` if every branch agrees on it.
    pub fn definite_label(&self, qubit: QubitId) -> Result<Option<PolLabel>> {
        self.check_qubit(qubit)?;
        let mut it = self.branches.iter().map(|b| b.label[qubit.0]);
        let first = it.next();
        Ok(match first {
            Some(l) if it.all(|m| m == l) => Some(l),
            _ => None,
        })
    }

    /// Total weight of branches whose `qubit` carries `label`, i.e. the Born
    /// probability of finding that label.
    pub fn label_probability(&self, qubit: QubitId, label: PolLabel) -> Result<f64> {
        self.check_qubit(qubit)?;
        let kept: Vec<Branch> =
            self.branches.iter().filter(|b| b.label[qubit.0] == label).cloned().collect();
        Ok(self.norm_of(&kept) / self.norm())
    }

    /// Projects `qubit` onto `label` and renormalizes.
    pub fn postselect(&self, qubit: QubitId, label: PolLabel) -> Result<HybridState> {
        self.check_qubit(qubit)?;
        let kept =
            self.branches.iter().filter(|b| b.label[qubit.0] == label).cloned().collect();
        self.with_branches(kept).renormalized()
    }

    /// Removes `qubit` from the register. The qubit must carry a definite label.
    pub fn remove_qubit(&self, qubit: QubitId) -> Result<(HybridState, PolLabel)> {
        let label = self.definite_label(qubit)?.ok_or_else(|| {
            Error::invalid(format!("{qubit} is entangled and cannot be removed"))
        })?;
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let mut nb = b.clone();
                nb.label.remove(qubit.0);
                nb
            })
            .collect();
        let mut out = self.with_branches(branches);
        out.register -= 1;
        Ok((out, label))
    }

    /// Drops a probe column, keeping weights as they are. Used by projection.
    pub(crate) fn drop_probe_with_weights(&self, slot: usize, weights: Vec<Complex64>) -> Self {
        let branches = self
            .branches
            .iter()
            .zip(weights)
            .map(|(b, w)| {
                let mut amps = b.amps.clone();
                amps.remove(slot);
                Branch { label: b.label.clone(), amps, weight: w }
            })
            .collect();
        let mut out = self.with_branches(branches);
        out.probes.remove(slot);
        out
    }

    pub(crate) fn renormalized(&self) -> Result<HybridState> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid(format!("state has norm {n} and cannot be normalized")));
        }
        let s = 1.0 / n.sqrt();
        let branches = self
            .branches
            .iter()
            .map(|b| Branch { weight: b.weight * s, ..b.clone() })
            .collect();
        Ok(self.with_branches(branches))
    }

    /// Rebuilds a state with new branches, merging duplicates.
    fn with_branches(&self, branches: Vec<Branch>) -> HybridState {
        let mut merged: Vec<Branch> = Vec::with_capacity(branches.len());
        for b in branches {
            match merged.iter_mut().find(|m| m.label == b.label && amps_match(&m.amps, &b.amps)) {
                Some(m) => m.weight += b.weight,
                None => merged.push(b),
            }
        }
        merged.retain(|b| b.weight.norm() > DROP_THRESHOLD);
        HybridState {
            register: self.register,
            probes: self.probes.clone(),
            next_probe: self.next_probe,
            branches: merged,
        }
    }
}
