use std::f64::consts::FRAC_1_SQRT_2;

use kerrsim::analysis::{error_model, fidelity, trial_rng};
use kerrsim::fock_oracle::crosscheck;
use kerrsim::gates::{
    bell_measure, cnot, parity_gate, qnd_polarization_measure, qnd_presence_detect, Basis, BellLabel, GateConfig,
    Readout,
};
use kerrsim::homodyne::Parity;
use kerrsim::{HybridState, PolLabel, QubitId, QubitSpec};
use num_complex::Complex64;

fn cfg() -> GateConfig {
    GateConfig::new(100.0, 0.3).unwrap()
}

fn basis(b: usize) -> QubitSpec {
    if b == 0 {
        QubitSpec::h()
    } else {
        QubitSpec::v()
    }
}

#[test]
fn spectator_qubit_survives_parity_gate() {
    // Qubits 0,1 in a definite odd subspace, qubit 2 entangled with them.
    let s = HybridState::from_terms(
        3,
        [
            (vec![PolLabel::H, PolLabel::V, PolLabel::H], Complex64::new(0.6, 0.0)),
            (vec![PolLabel::V, PolLabel::H, PolLabel::V], Complex64::new(0.0, 0.8)),
        ],
    )
    .unwrap();
    let c = cfg();
    let mut rng = trial_rng(1, 0);
    for _ in 0..20 {
        let mut ro = Readout::random(&mut rng);
        let (out, post) = parity_gate(&s, QubitId(0), QubitId(1), Basis::Rectilinear, &c, &mut ro).unwrap();
        assert_eq!(out.parity, Parity::Odd);
        assert!((fidelity(&post, &s).unwrap().value - 1.0).abs() < 1e-10);
    }
}

#[test]
fn bell_analyzer_is_non_destructive() {
    let c = cfg();
    let mut rng = trial_rng(2, 0);
    for l in BellLabel::ALL {
        let mut ro = Readout::random(&mut rng);
        let (out, post) = bell_measure(&l.state(), QubitId(0), QubitId(1), &c, &mut ro).unwrap();
        assert_eq!(out.label, l);
        assert!((fidelity(&post, &l.state()).unwrap().value - 1.0).abs() < 1e-10);
    }
}

#[test]
fn post_states_do_not_depend_on_reading_within_class() {
    let c = cfg();
    let input = HybridState::new_product_state(&[QubitSpec::diagonal(), QubitSpec::real(0.6, 0.8)]).unwrap();
    let odd_peak = 2.0 * c.alpha() * c.theta().cos();
    for (a, b) in [(2.0 * c.alpha(), 2.0 * c.alpha() + 1.7), (odd_peak, odd_peak - 2.3), (odd_peak + 0.4, odd_peak - 0.9)] {
        let run = |x: f64| {
            let mut ro = Readout::forced([x]);
            parity_gate(&input, QubitId(0), QubitId(1), Basis::Rectilinear, &c, &mut ro).unwrap().1
        };
        let (sa, sb) = (run(a), run(b));
        let overlap = sa.inner(&sb).unwrap();
        assert!((overlap - Complex64::new(1.0, 0.0)).norm() < 1e-10, "{a} vs {b}: {overlap}");
    }
}

#[test]
fn cnot_twice_is_identity() {
    let c = cfg();
    let mut rng = trial_rng(4, 0);
    let budget = 4.0 * 3.0 * error_model(c.alpha(), c.theta()).unwrap().p_err_parity;
    for ci in 0..2 {
        for ti in 0..2 {
            let input = HybridState::new_product_state(&[basis(ci), basis(ti)]).unwrap();
            let mut ro = Readout::random(&mut rng);
            let (_, once) = cnot(&input, QubitId(0), QubitId(1), &c, &mut ro).unwrap();
            let (_, twice) = cnot(&once, QubitId(0), QubitId(1), &c, &mut ro).unwrap();
            assert!(fidelity(&twice, &input).unwrap().value >= 1.0 - budget);
        }
    }
}

#[test]
fn cnot_branch_count_stays_small() {
    let c = cfg();
    let mut rng = trial_rng(6, 0);
    let input = HybridState::new_product_state(&[QubitSpec::real(0.6, 0.8), QubitSpec::diagonal()]).unwrap();
    for _ in 0..50 {
        let mut ro = Readout::random(&mut rng);
        let (_, s) = cnot(&input, QubitId(0), QubitId(1), &c, &mut ro).unwrap();
        assert!(s.branches().len() <= 4);
        assert!(s.probes().is_empty());
    }
}

#[test]
fn cnot_on_reversed_roles() {
    let c = cfg();
    for ci in 0..2 {
        for ti in 0..2 {
            // Control on qubit 1, target on qubit 0.
            let input = HybridState::new_product_state(&[basis(ti), basis(ci)]).unwrap();
            let expect = HybridState::new_product_state(&[basis(ti ^ ci), basis(ci)]).unwrap();
            let mut rng = trial_rng(8, (2 * ci + ti) as u64);
            let mut ro = Readout::random(&mut rng);
            let (_, s) = cnot(&input, QubitId(1), QubitId(0), &c, &mut ro).unwrap();
            assert!((fidelity(&s, &expect).unwrap().value - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn polarization_readout_frequencies() {
    let c = cfg();
    for (spec, p_v) in [(QubitSpec::diagonal(), 0.5), (QubitSpec::real(0.6, 0.8), 0.64)] {
        let input = HybridState::new_product_state(&[spec]).unwrap();
        let n = 20_000;
        let mut v = 0;
        let mut collapse = 0.0;
        for i in 0..n {
            let mut rng = trial_rng(10, i);
            let mut ro = Readout::random(&mut rng);
            let (det, post) = qnd_polarization_measure(&input, QubitId(0), &c, &mut ro).unwrap();
            let pol = det.polarization.unwrap();
            collapse += post.label_probability(QubitId(0), pol).unwrap();
            if pol == PolLabel::V {
                v += 1;
            }
        }
        assert!(collapse / n as f64 > 1.0 - 1e-4);
        let f = v as f64 / n as f64;
        let sigma = (p_v * (1.0 - p_v) / n as f64).sqrt();
        assert!((f - p_v).abs() < 4.0 * sigma, "{f} vs {p_v}");
    }
}

#[test]
fn presence_detector_keeps_superposition() {
    let c = cfg();
    let input = HybridState::new_product_state(&[QubitSpec::Pol(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, FRAC_1_SQRT_2),
    )])
    .unwrap();
    let mut rng = trial_rng(12, 0);
    let mut ro = Readout::random(&mut rng);
    let (det, post) = qnd_presence_detect(&input, QubitId(0), &c, &mut ro).unwrap();
    assert!(det.photon_present);
    assert!((fidelity(&post, &input).unwrap().value - 1.0).abs() < 1e-10);
}

#[test]
fn oracle_agrees_across_coupling_strengths() {
    for alpha in [0.5, 1.5, 3.0] {
        for theta in [0.1, 0.5, 1.0] {
            let rep = crosscheck::validate(alpha, theta).unwrap();
            assert!(rep.passes(1e-8, 1e-10), "alpha {alpha}, theta {theta}: {} {}", rep.max_density_linf, rep.min_fidelity);
        }
    }
}
