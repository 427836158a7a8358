//! Truncated Fock-space simulation of signal rails ⊗ probe.
//!
//! This is a brute-force route to the same physics as the branch engine: the
//! cross-Kerr interaction is the diagonal unitary `e^{iθ n_a n_c}` and the
//! homodyne kernel is built from Hermite functions. It shares no numerics
//! with [`crate::hybrid_state`] or [`crate::homodyne`] beyond the label layout.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::homodyne::Grid;
use crate::hybrid_state::{HybridState, PolLabel};

/// Dense amplitudes over a product of truncated Fock spaces, last mode fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

/// Truncation `N ≥ |α|² + 12|α| + 20`, which keeps coherent-state leakage below 10⁻¹⁰.
pub fn truncation_for(alpha: Complex64) -> usize {
    let a = alpha.norm();
    (a * a + 12.0 * a + 20.0).ceil() as usize
}

impl FockVector {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || size != amps.len() {
            return Err(Error::invalid("Fock dimensions do not match amplitude count"));
        }
        Ok(FockVector { dims, amps })
    }

    /// Single-mode vector from amplitudes `c₀, c₁, …`.
    pub fn single_mode(amps: Vec<Complex64>) -> Result<Self> {
        FockVector::new(vec![amps.len()], amps)
    }

    /// `|n⟩` in a space of dimension `dim`.
    pub fn number(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::invalid(format!("|{n}⟩ does not fit in dimension {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[n] = Complex64::new(1.0, 0.0);
        FockVector::single_mode(amps)
    }

    /// Truncated coherent state, `cₙ = e^{−|α|²/2} αⁿ/√n!`.
    pub fn coherent(alpha: Complex64, dim: usize) -> Self {
        let mut amps = Vec::with_capacity(dim);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            if n > 0 {
                c = c * alpha / (n as f64).sqrt();
            }
            amps.push(c);
        }
        FockVector { dims: vec![dim], amps }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &FockVector) -> FockVector {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        FockVector { dims, amps }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        if self.dims != other.dims {
            return Err(Error::RegisterMismatch("Fock dimensions differ".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Occupation numbers of flat index `i`.
    fn occupations(&self, mut i: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for (m, &d) in self.dims.iter().enumerate().rev() {
            occ[m] = i % d;
            i /= d;
        }
        occ
    }

    fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.dims.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!("mode {mode} out of range for {} modes", self.dims.len())))
        }
    }

    /// Cross-Kerr interaction `e^{iθ n_a n_c}` between two modes.
    pub fn apply_cross_kerr(&self, mode_a: usize, mode_c: usize, theta: f64) -> Result<FockVector> {
        self.check_mode(mode_a)?;
        self.check_mode(mode_c)?;
        if mode_a == mode_c {
            return Err(Error::invalid("cross-Kerr needs two distinct modes"));
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let occ = self.occupations(i);
                a * Complex64::cis(theta * (occ[mode_a] * occ[mode_c]) as f64)
            })
            .collect();
        Ok(FockVector { dims: self.dims.clone(), amps })
    }

    /// Splits the flat index into (rest, n) for `mode`; returns amplitudes
    /// grouped as `rest_index → [amp(n)]`.
    fn split_mode(&self, mode: usize) -> (Vec<usize>, Vec<Vec<Complex64>>) {
        let d = self.dims[mode];
        let stride = self.stride(mode);
        let mut rest_dims = self.dims.clone();
        rest_dims.remove(mode);
        let rest: usize = rest_dims.iter().product();
        let mut groups = vec![vec![Complex64::new(0.0, 0.0); d]; rest];
        for (i, a) in self.amps.iter().enumerate() {
            let n = (i / stride) % d;
            let hi = i / (stride * d);
            let lo = i % stride;
            groups[hi * stride + lo][n] = *a;
        }
        (rest_dims, groups)
    }
}

/// `|⟨a|b⟩|²` for Fock vectors.
pub fn fock_fidelity(a: &FockVector, b: &FockVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr() / (a.norm_sqr() * b.norm_sqr()))
}

/// Hermite functions `ψ₀(x) … ψ_{n_max−1}(x)` in the `X = a + a†` scaling,
/// `ψₙ(x) = (2π)^{−1/4} (2ⁿ n!)^{−1/2} Hₙ(x/√2) e^{−x²/4}`.
///
/// Uses the normalized three-term recurrence
/// `ψ_{n+1} = (x ψₙ − √n ψ_{n−1}) / √(n+1)` carried in scaled form with a
/// running log-scale, so neither overflow nor premature underflow occurs.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max);
    if n_max == 0 {
        return out;
    }
    let prefactor = (2.0 * std::f64::consts::PI).powf(-0.25);
    out.push(prefactor * (-0.25 * x * x).exp());
    let mut log_scale = prefactor.ln() - 0.25 * x * x;
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    let emit = |u: f64, s: f64| if u == 0.0 { 0.0 } else { u.signum() * (u.abs().ln() + s).exp() };
    for n in 0..n_max - 1 {
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        out.push(emit(cur, log_scale));
        let big = cur.abs().max(prev.abs());
        if big > 1e150 {
            prev /= big;
            cur /= big;
            log_scale += big.ln();
        }
    }
    out
}

pub fn hermite_function(n: usize, x: f64) -> f64 {
    hermite_functions(n + 1, x)[n]
}

/// `|signal⟩ ⊗ |probe⟩` after `e^{iθ n_a n_c}`; the probe is the last mode.
pub fn oracle_kerr(signal: &FockVector, probe: &FockVector, theta: f64) -> Result<FockVector> {
    if signal.dims.len() != 1 || probe.dims.len() != 1 {
        return Err(Error::invalid("oracle_kerr takes single-mode signal and probe"));
    }
    signal.tensor(probe).apply_cross_kerr(0, 1, theta)
}

/// `p(x) = Σ_rest |Σ_{n_c} amp(rest, n_c) ψ_{n_c}(x)|²` on `grid`.
pub fn oracle_density(joint: &FockVector, probe_mode: usize, grid: &Grid) -> Result<Vec<f64>> {
    joint.check_mode(probe_mode)?;
    let (_, groups) = joint.split_mode(probe_mode);
    let d = joint.dims[probe_mode];
    Ok(grid
        .points()
        .map(|x| {
            let psi = hermite_functions(d, x);
            groups
                .iter()
                .map(|g| g.iter().zip(&psi).map(|(a, p)| a * p).sum::<Complex64>().norm_sqr())
                .sum()
        })
        .collect())
}

/// Signal-side posterior after projecting `probe_mode` onto `|x⟩`, normalized.
pub fn oracle_project(joint: &FockVector, probe_mode: usize, x: f64) -> Result<FockVector> {
    joint.check_mode(probe_mode)?;
    if joint.dims.len() < 2 {
        return Err(Error::invalid("nothing left after removing the probe mode"));
    }
    let (rest_dims, groups) = joint.split_mode(probe_mode);
    let psi = hermite_functions(joint.dims[probe_mode], x);
    let amps: Vec<Complex64> =
        groups.iter().map(|g| g.iter().zip(&psi).map(|(a, p)| a * p).sum()).collect();
    let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if !(n > 0.0) {
        return Err(Error::ImpossibleOutcome { x });
    }
    let s = 1.0 / n.sqrt();
    FockVector::new(rest_dims, amps.into_iter().map(|a| a * s).collect())
}

/// Dual-rail embedding of a probe-free state: qubit `q` occupies modes
/// `2q` (H rail) and `2q + 1` (V rail), each of dimension 2.
pub fn embed_qubits(state: &HybridState) -> Result<FockVector> {
    if !state.probes().is_empty() {
        return Err(Error::invalid("only probe-free states can be embedded"));
    }
    let modes = 2 * state.register_size();
    let dims = vec![2; modes.max(1)];
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << modes.max(1)];
    for b in state.branches() {
        let mut idx = 0usize;
        for &l in b.label() {
            let (h, v) = match l {
                PolLabel::Vac => (0, 0),
                PolLabel::H => (1, 0),
                PolLabel::V => (0, 1),
            };
            idx = (idx << 2) | (h << 1) | v;
        }
        amps[idx] += b.weight();
    }
    FockVector::new(dims, amps)
}

/// Rail mode of `(qubit, trigger)` in the dual-rail embedding.
pub fn rail_mode(qubit: usize, trigger: PolLabel) -> Result<usize> {
    match trigger {
        PolLabel::H => Ok(2 * qubit),
        PolLabel::V => Ok(2 * qubit + 1),
        PolLabel::Vac => Err(Error::invalid("vacuum has no rail")),
    }
}

pub mod crosscheck {
    //! Branch engine vs Fock oracle on the same Kerr circuits.

    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use num_complex::Complex64;
    use serde::{Deserialize, Serialize};

    use super::*;
    use crate::homodyne;
    use crate::hybrid_state::{QubitId, QubitSpec};

    /// Probe coupling: `qubit` carrying `trigger` kicks the probe by `theta`.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Coupling {
        pub qubit: usize,
        pub trigger: PolLabel,
        pub theta: f64,
    }

    #[derive(Debug, Clone)]
    pub struct KerrCircuit {
        pub name: String,
        pub input: HybridState,
        pub alpha: Complex64,
        pub couplings: Vec<Coupling>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CaseReport {
        pub name: String,
        pub density_linf: f64,
        pub min_fidelity: f64,
        pub truncation: usize,
        pub leakage: f64,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ValidationReport {
        pub alpha: f64,
        pub theta: f64,
        pub cases: Vec<CaseReport>,
        pub max_density_linf: f64,
        pub min_fidelity: f64,
    }

    impl ValidationReport {
        pub fn passes(&self, density_tol: f64, fidelity_tol: f64) -> bool {
            self.max_density_linf <= density_tol && self.min_fidelity >= 1.0 - fidelity_tol
        }
    }

    /// Grid covering `±(2|α| + 10)` with step 10⁻².
    pub fn oracle_grid(alpha: Complex64) -> Grid {
        let r = 2.0 * alpha.norm() + 10.0;
        Grid::spanning(-r, r, 1e-2)
    }

    /// Twelve signal configurations: single dual-rail qubits (with vacuum
    /// admixtures), two-qubit parity couplings and a polarization-blind
    /// coupling.
    pub fn validation_corpus(alpha: f64, theta: f64) -> Vec<KerrCircuit> {
        use PolLabel::{Vac, H, V};
        let a = Complex64::new(alpha, 0.0);
        let h_only = vec![Coupling { qubit: 0, trigger: H, theta }];
        let both_rails =
            vec![Coupling { qubit: 0, trigger: H, theta }, Coupling { qubit: 0, trigger: V, theta }];
        let parity =
            vec![Coupling { qubit: 0, trigger: H, theta }, Coupling { qubit: 1, trigger: H, theta: -theta }];
        let r = FRAC_1_SQRT_2;
        let pol = |h: Complex64, v: Complex64| HybridState::new_product_state(&[QubitSpec::Pol(h, v)]).unwrap();
        let c = Complex64::new;
        let terms = |reg: usize, t: Vec<(Vec<PolLabel>, Complex64)>| HybridState::from_terms(reg, t).unwrap();
        let case = |name: &str, input: HybridState, couplings: &Vec<Coupling>| KerrCircuit {
            name: name.into(),
            input,
            alpha: a,
            couplings: couplings.clone(),
        };
        vec![
            case("H", pol(c(1.0, 0.0), c(0.0, 0.0)), &h_only),
            case("V", pol(c(0.0, 0.0), c(1.0, 0.0)), &h_only),
            case("VAC", HybridState::new_product_state(&[QubitSpec::Vacuum]).unwrap(), &h_only),
            case("D", pol(c(r, 0.0), c(r, 0.0)), &h_only),
            case("A", pol(c(r, 0.0), c(-r, 0.0)), &h_only),
            case("R", pol(c(r, 0.0), c(0.0, r)), &h_only),
            case("0.6H+0.8V", pol(c(0.6, 0.0), c(0.8, 0.0)), &h_only),
            case("(|0>+|1>)/sqrt2", terms(1, vec![(vec![Vac], c(1.0, 0.0)), (vec![H], c(1.0, 0.0))]), &h_only),
            case(
                "VAC+H+iV",
                terms(
                    1,
                    vec![(vec![Vac], c(0.5, 0.0)), (vec![H], c(0.0, 0.5)), (vec![V], Complex64::from_polar(0.7, 1.1))],
                ),
                &h_only,
            ),
            case(
                "H+e^{i pi/3}V presence",
                pol(c(r, 0.0), Complex64::from_polar(r, PI / 3.0)),
                &both_rails,
            ),
            case(
                "uniform pair parity",
                HybridState::new_product_state(&[QubitSpec::diagonal(), QubitSpec::diagonal()]).unwrap(),
                &parity,
            ),
            case(
                "entangled pair parity",
                terms(
                    2,
                    vec![
                        (vec![H, H], c(0.3, 0.1)),
                        (vec![H, V], c(0.5, -0.2)),
                        (vec![V, H], c(-0.4, 0.3)),
                        (vec![V, V], c(0.2, 0.6)),
                    ],
                ),
                &parity,
            ),
        ]
    }

    /// Runs one circuit through both engines; compares densities on the oracle
    /// grid and posteriors at each of `xs`.
    pub fn cross_validate(circuit: &KerrCircuit, xs: &[f64]) -> Result<CaseReport> {
        // Branch engine.
        let (mut s, probe) = circuit.input.allocate_probe(circuit.alpha);
        for c in &circuit.couplings {
            s = s.conditional_kerr(QubitId(c.qubit), c.trigger, probe, c.theta)?;
        }
        let grid = oracle_grid(circuit.alpha);
        let branch_density = homodyne::density_on(&s, probe, grid)?;

        // Fock oracle.
        let n = truncation_for(circuit.alpha);
        let coherent = FockVector::coherent(circuit.alpha, n);
        let leakage = 1.0 - coherent.norm_sqr();
        let mut joint = embed_qubits(&circuit.input)?.tensor(&coherent);
        let probe_mode = joint.dims().len() - 1;
        for c in &circuit.couplings {
            joint = joint.apply_cross_kerr(rail_mode(c.qubit, c.trigger)?, probe_mode, c.theta)?;
        }
        let oracle = oracle_density(&joint, probe_mode, &grid)?;

        let density_linf = branch_density
            .values
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let mut min_fidelity = 1.0f64;
        for &x in xs {
            let post_branch = embed_qubits(&homodyne::project(&s, probe, x)?)?;
            let post_oracle = oracle_project(&joint, probe_mode, x)?;
            min_fidelity = min_fidelity.min(fock_fidelity(&post_branch, &post_oracle)?);
        }
        Ok(CaseReport { name: circuit.name.clone(), density_linf, min_fidelity, truncation: n, leakage })
    }

    /// Cross-validates the whole corpus at `(alpha, theta)`, projecting at
    /// `X₀ − 2`, `X₀`, `X₀ + 2` and at both peak centres.
    pub fn validate(alpha: f64, theta: f64) -> Result<ValidationReport> {
        let x0 = homodyne::peak_midpoint(alpha, theta);
        let xs = [x0 - 2.0, x0, x0 + 2.0, 2.0 * alpha, 2.0 * alpha * theta.cos()];
        let cases = validation_corpus(alpha, theta)
            .iter()
            .map(|c| cross_validate(c, &xs))
            .collect::<Result<Vec<_>>>()?;
        let max_density_linf = cases.iter().map(|c| c.density_linf).fold(0.0, f64::max);
        let min_fidelity = cases.iter().map(|c| c.min_fidelity).fold(1.0, f64::min);
        Ok(ValidationReport { alpha, theta, cases, max_density_linf, min_fidelity })
    }
}
