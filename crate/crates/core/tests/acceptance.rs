//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use kerrsim::analysis::{
    error_model, fidelity, half_erfc, required_alpha, run_trials, trial_rng, within_binomial_sigma,
    DetectorErrorExperiment, ParityErrorExperiment, TrialRng,
};
use kerrsim::fock_oracle::crosscheck;
use kerrsim::gates::{bell_measure, cnot, parity_gate, Basis, BellLabel, GateConfig, Quadrature, Readout};
use kerrsim::homodyne::{self, peak_separation, Parity};
use kerrsim::{HybridState, PolLabel, QubitId, QubitSpec, Unitary2};
use num_complex::Complex64;
use rand::Rng;

const SEED: u64 = 0x5eed_2005;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn uniform_pair() -> HybridState {
    HybridState::new_product_state(&[QubitSpec::diagonal(), QubitSpec::diagonal()]).unwrap()
}

fn detector_error() -> Verdict {
    let theta: f64 = 0.3;
    let cfg = GateConfig::new(3.0 / theta.sin(), theta).unwrap();
    let exp = DetectorErrorExperiment { cfg, quadrature: Quadrature::Momentum };
    let want = half_erfc(6.0 / (2.0 * SQRT_2));
    let r = run_trials(&exp, 100_000, SEED, None).unwrap();
    verdict(
        r.brackets(want) && (exp.analytic() - want).abs() < 1e-15,
        format!("rate {:.4e}, wilson95 [{:.4e}, {:.4e}], analytic {want:.4e}", r.point_estimate, r.wilson95.0, r.wilson95.1),
    )
}

fn parity_error_law() -> Verdict {
    let theta = 0.3;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, xd) in [2.0, 4.0, 8.0].into_iter().enumerate() {
        let cfg = GateConfig::new(xd / peak_separation(1.0, theta), theta).unwrap();
        let want = error_model(cfg.alpha(), theta).unwrap().p_err_parity;
        let exp = ParityErrorExperiment { cfg, basis: Basis::Rectilinear };
        let r = run_trials(&exp, 1_000_000, SEED + i as u64, None).unwrap();
        let ok = within_binomial_sigma(r.successes, r.trials, want, 3.0) && (xd < 8.0 || r.point_estimate < 1e-4);
        pass &= ok;
        parts.push(format!("Xd={xd}: {:.3e} vs {want:.3e}", r.point_estimate));
    }
    verdict(pass, parts.join("; "))
}

fn parity_conditional_states() -> Verdict {
    let cfg = GateConfig::new(100.0, 0.3).unwrap();
    let input = uniform_pair();
    let even_ref = BellLabel::PhiPlus.state();
    let odd_ref = BellLabel::PsiPlus.state();
    let (mut even_sum, mut even_n, mut odd_sum, mut odd_n) = (0.0, 0u32, 0.0, 0u32);
    for i in 0..10_000 {
        let mut rng = trial_rng(SEED, i);
        let mut ro = Readout::random(&mut rng);
        let (out, s) = parity_gate(&input, QubitId(0), QubitId(1), Basis::Rectilinear, &cfg, &mut ro).unwrap();
        match out.parity {
            Parity::Even => {
                even_sum += fidelity(&s, &even_ref).unwrap().value;
                even_n += 1;
            }
            Parity::Odd => {
                odd_sum += fidelity(&s, &odd_ref).unwrap().value;
                odd_n += 1;
            }
        }
    }
    let (fe, fo) = (even_sum / even_n as f64, odd_sum / odd_n as f64);
    let mut forced_worst = 1.0f64;
    for (x, reference) in [(2.0 * cfg.alpha(), &even_ref), (2.0 * cfg.alpha() * cfg.theta().cos(), &odd_ref)] {
        let mut ro = Readout::forced([x]);
        let (_, s) = parity_gate(&input, QubitId(0), QubitId(1), Basis::Rectilinear, &cfg, &mut ro).unwrap();
        forced_worst = forced_worst.min(fidelity(&s, reference).unwrap().value);
    }
    verdict(
        fe >= 1.0 - 1e-4 && fo >= 1.0 - 1e-4 && (forced_worst - 1.0).abs() <= 1e-10,
        format!("even {fe:.8} ({even_n}), odd {fo:.8} ({odd_n}), forced peaks {forced_worst:.12}"),
    )
}

fn bell_analyzer() -> Verdict {
    let cfg = GateConfig::new(100.0, 0.3).unwrap();
    let per_state = 100_000u64;
    let mut confusion = [[0u64; 4]; 4];
    let mut worst_diag = 1.0f64;
    let mut worst_fid = 1.0f64;
    for truth in BellLabel::ALL {
        let input = truth.state();
        let refs: Vec<HybridState> = BellLabel::ALL.iter().map(|l| l.state()).collect();
        let mut fid_sum = 0.0;
        for i in 0..per_state {
            let mut rng = trial_rng(SEED ^ truth.index() as u64, i);
            let mut ro = Readout::random(&mut rng);
            let (out, s) = bell_measure(&input, QubitId(0), QubitId(1), &cfg, &mut ro).unwrap();
            confusion[truth.index()][out.label.index()] += 1;
            fid_sum += fidelity(&s, &refs[out.label.index()]).unwrap().value;
        }
        worst_diag = worst_diag.min(confusion[truth.index()][truth.index()] as f64 / per_state as f64);
        worst_fid = worst_fid.min(fid_sum / per_state as f64);
    }
    verdict(
        worst_diag >= 1.0 - 1e-4 && worst_fid >= 1.0 - 1e-4,
        format!("min diagonal {worst_diag:.6}, min mean post-state fidelity {worst_fid:.8}, matrix {confusion:?}"),
    )
}

fn cnot_gate() -> Verdict {
    let cfg = GateConfig::new(100.0, 0.3).unwrap();
    let even = 2.0 * cfg.alpha();
    let odd = 2.0 * cfg.alpha() * cfg.theta().cos();
    let spec = |b: usize| if b == 0 { QubitSpec::h() } else { QubitSpec::v() };
    let mut truth_ok = true;
    for c in 0..2 {
        for t in 0..2 {
            let input = HybridState::new_product_state(&[spec(c), spec(t)]).unwrap();
            let expect = HybridState::new_product_state(&[spec(c), spec(t ^ c)]).unwrap();
            for heralds in 0..8 {
                let xs = (0..3).map(|k| if heralds >> k & 1 == 0 { even } else { odd });
                let mut ro = Readout::forced(xs);
                let (_, s) = cnot(&input, QubitId(0), QubitId(1), &cfg, &mut ro).unwrap();
                truth_ok &= s.register_size() == 2 && (fidelity(&s, &expect).unwrap().value - 1.0).abs() <= 1e-10;
            }
        }
    }
    let input = HybridState::new_product_state(&[QubitSpec::diagonal(), QubitSpec::h()]).unwrap();
    let target = BellLabel::PhiPlus.state();
    let trials = 10_000;
    let mut sum = 0.0;
    let mut restored = true;
    for i in 0..trials {
        let mut rng = trial_rng(SEED, i);
        let mut ro = Readout::random(&mut rng);
        let (_, s) = cnot(&input, QubitId(0), QubitId(1), &cfg, &mut ro).unwrap();
        restored &= s.register_size() == 2;
        sum += fidelity(&s, &target).unwrap().value;
    }
    let mean = sum / trials as f64;
    verdict(
        truth_ok && restored && mean >= 0.999,
        format!("truth table (32 herald patterns) {truth_ok}, register restored {restored}, mean entangling fidelity {mean:.8}"),
    )
}

fn resource_model() -> Verdict {
    let r = required_alpha(0.01, 10.0).unwrap();
    verdict(
        ((r.alpha - 1e5) / 1e5).abs() <= 0.02 && ((r.photon_number - 1e10) / 1e10).abs() <= 0.05,
        format!("alpha {:.6e}, photon number {:.6e}", r.alpha, r.photon_number),
    )
}

fn oracle_equivalence() -> Verdict {
    let rep = crosscheck::validate(2.0, 0.5).unwrap();
    verdict(
        rep.cases.len() == 12 && rep.passes(1e-8, 1e-10),
        format!("{} states, density L∞ {:.3e}, min fidelity 1-{:.3e}", rep.cases.len(), rep.max_density_linf, 1.0 - rep.min_fidelity),
    )
}

fn random_state(rng: &mut TrialRng) -> HybridState {
    let n = rng.random_range(1..=3);
    let labels = [PolLabel::H, PolLabel::V];
    let mut terms = Vec::new();
    for k in 0..(1usize << n) {
        let label = (0..n).map(|q| labels[k >> q & 1]).collect::<Vec<_>>();
        terms.push((label, Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
    }
    let norm: f64 = terms.iter().map(|t| t.1.norm_sqr()).sum::<f64>().sqrt();
    HybridState::from_terms(n, terms.into_iter().map(|(l, w)| (l, w / norm))).unwrap()
}

fn random_unitary(rng: &mut TrialRng) -> Unitary2 {
    let (a, b, c, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    Unitary2::phase(a * tau).compose(&Unitary2::hadamard()).compose(&Unitary2::phase(b * tau)).compose(
        &Unitary2::hadamard().compose(&Unitary2::phase(c * tau)).compose(&Unitary2::phase(d * tau).in_diagonal_basis()),
    )
}

fn invariants() -> Verdict {
    let mut worst_drift = 0.0f64;
    let mut worst_post = 0.0f64;
    for i in 0..1_000 {
        let mut rng = trial_rng(SEED, i);
        let mut s = random_state(&mut rng);
        let n = s.register_size();
        let (s2, probe) = s.allocate_probe(Complex64::from_polar(rng.random_range(0.0..5.0), rng.random_range(0.0..6.3)));
        s = s2;
        for _ in 0..6 {
            let q = QubitId(rng.random_range(0..n));
            s = match rng.random_range(0..3) {
                0 => s.apply_1q(q, &random_unitary(&mut rng)).unwrap(),
                1 => s
                    .conditional_kerr(q, if rng.random() { PolLabel::H } else { PolLabel::V }, probe, rng.random_range(-1.5..1.5))
                    .unwrap(),
                _ => s.rotate_probe(probe, rng.random_range(0.0..6.3)).unwrap(),
            };
            worst_drift = worst_drift.max((s.norm() - 1.0).abs());
        }
        let x = homodyne::sample(&s, probe, &mut rng, 0.0).unwrap();
        let post = homodyne::project(&s, probe, x).unwrap();
        worst_post = worst_post.max((post.norm() - 1.0).abs());
    }
    let cfg = GateConfig::new(100.0, 0.3).unwrap();
    let exp = ParityErrorExperiment { cfg, basis: Basis::Diagonal };
    let reports: Vec<_> = [Some(1), Some(2), Some(4), None]
        .into_iter()
        .map(|jobs| run_trials(&exp, 20_000, SEED, jobs).unwrap())
        .collect();
    let deterministic = reports.windows(2).all(|w| w[0] == w[1]);
    verdict(
        worst_drift <= 1e-10 && worst_post <= 1e-10 && deterministic,
        format!("max norm drift {worst_drift:.2e}, post-projection {worst_post:.2e}, run_trials deterministic {deterministic}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 detector error rate", detector_error),
        ("2 parity error law", parity_error_law),
        ("3 parity conditional states", parity_conditional_states),
        ("4 Bell analyzer", bell_analyzer),
        ("5 CNOT", cnot_gate),
        ("6 resource model", resource_model),
        ("7 Fock oracle equivalence", oracle_equivalence),
        ("8 invariants", invariants),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name} ({:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
