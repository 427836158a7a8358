use kerrsim::analysis::{error_model, run_trials, trial_rng, within_binomial_sigma, ParityErrorExperiment};
use kerrsim::gates::{Basis, GateConfig};
use kerrsim::homodyne::{self, peak_separation, threshold_classify, Parity};
use kerrsim::{HybridState, PolLabel, QubitId, QubitSpec};
use num_complex::Complex64;
use rand::Rng;

/// χ²₄₉ quantile at 0.999.
const CHI2_49_999: f64 = 85.350_564_608_593_05;

fn random_corpus() -> Vec<(HybridState, kerrsim::ProbeId)> {
    let mut rng = trial_rng(7, 0);
    (0..20)
        .map(|i| {
            let labels = [PolLabel::Vac, PolLabel::H, PolLabel::V];
            let mut terms = Vec::new();
            for l in labels {
                if rng.random::<f64>() < 0.8 || l == PolLabel::H {
                    terms.push((vec![l], Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
                }
            }
            let norm = terms.iter().map(|t| t.1.norm_sqr()).sum::<f64>().sqrt();
            let s = HybridState::from_terms(1, terms.into_iter().map(|(l, w)| (l, w / norm))).unwrap();
            let alpha = Complex64::from_polar(rng.random_range(0.0..3.0), rng.random_range(0.0..6.3));
            let (s, p) = s.allocate_probe(alpha);
            // Even indices keep the branches far apart in X (mixture sampler),
            // odd ones overlap and interfere (grid sampler).
            let theta = if i % 2 == 0 { std::f64::consts::PI } else { rng.random_range(0.2..1.2) };
            let s = s.conditional_kerr(QubitId(0), PolLabel::H, p, theta).unwrap();
            (s, p)
        })
        .collect()
}

#[test]
fn sampling_follows_density() {
    for (k, (s, p)) in random_corpus().into_iter().enumerate() {
        let d = homodyne::density(&s, p).unwrap();
        // 50 bins of equal probability from the density's CDF.
        let step = d.grid.step;
        let mut edges = Vec::new();
        let mut acc = 0.0;
        let total = d.integral();
        let mut next = total / 50.0;
        for (i, v) in d.values.iter().enumerate() {
            acc += v * step;
            if acc >= next && edges.len() < 49 {
                edges.push(d.grid.point(i) + step / 2.0);
                next += total / 50.0;
            }
        }
        let mut expected = vec![0.0; 50];
        for (i, v) in d.values.iter().enumerate() {
            let b = edges.partition_point(|&e| e <= d.grid.point(i));
            expected[b] += v * step / total;
        }
        let n = 100_000;
        let mut counts = [0u32; 50];
        let mut rng = trial_rng(11, k as u64);
        for _ in 0..n {
            let x = homodyne::sample(&s, p, &mut rng, 0.0).unwrap();
            counts[edges.partition_point(|&e| e <= x)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &e)| {
                let e = e * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CHI2_49_999, "state {k}: chi2 = {chi2}");
    }
}

#[test]
fn mixture_cdf_matches_within_ks_bound() {
    // (|VAC⟩ + |H⟩)/√2 with probes 0 and 3 after a π kick is a two-Gaussian mixture.
    let s = HybridState::from_terms(
        1,
        [(vec![PolLabel::Vac], Complex64::new(0.6, 0.0)), (vec![PolLabel::H], Complex64::new(0.0, 0.8))],
    )
    .unwrap();
    let (s, p) = s.allocate_probe(Complex64::new(1.5, 0.0));
    let s = s.conditional_kerr(QubitId(0), PolLabel::H, p, std::f64::consts::PI).unwrap();
    let mut rng = trial_rng(3, 0);
    let mut xs: Vec<f64> = (0..100_000).map(|_| homodyne::sample(&s, p, &mut rng, 0.0).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    let phi = |z: f64| 0.5 * libm_erfc(-z / std::f64::consts::SQRT_2);
    let cdf = |x: f64| 0.36 * phi(x - 3.0) + 0.64 * phi(x + 3.0);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (cdf(x) - i as f64 / n).abs().max((cdf(x) - (i + 1) as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks <= 0.01, "KS distance {ks}");
}

fn libm_erfc(z: f64) -> f64 {
    2.0 * kerrsim::analysis::half_erfc(z)
}

#[test]
fn noise_widens_readout() {
    let s = HybridState::new_product_state(&[QubitSpec::h()]).unwrap();
    let (s, p) = s.allocate_probe(Complex64::new(2.0, 0.0));
    let mut rng = trial_rng(5, 0);
    let n = 50_000;
    let xs: Vec<f64> = (0..n).map(|_| homodyne::sample(&s, p, &mut rng, 2.0).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 4.0).abs() < 0.05);
    assert!((var - 5.0).abs() < 0.15, "variance {var}");
}

#[test]
fn threshold_misclassification_matches_model() {
    // Direct classifier check, independent of the gate plumbing.
    let theta = 0.3;
    for (i, xd) in [2.0, 4.0, 8.0, 12.0].into_iter().enumerate() {
        let alpha = xd / peak_separation(1.0, theta);
        let want = error_model(alpha, theta).unwrap().p_err_parity;
        let even = HybridState::new_product_state(&[QubitSpec::h()]).unwrap();
        let (even, p) = even.allocate_probe(Complex64::new(alpha, 0.0));
        let mut rng = trial_rng(13, i as u64);
        let n = 1_000_000u64;
        let wrong = (0..n)
            .filter(|_| threshold_classify(homodyne::sample(&even, p, &mut rng, 0.0).unwrap(), alpha, theta) != Parity::Even)
            .count() as u64;
        assert!(within_binomial_sigma(wrong, n, want, 3.0), "Xd={xd}: {wrong}/{n} vs {want}");
    }
}

#[test]
fn parity_gate_error_at_wide_separation() {
    let theta = 0.3;
    let cfg = GateConfig::new(12.0 / peak_separation(1.0, theta), theta).unwrap();
    let want = error_model(cfg.alpha(), theta).unwrap().p_err_parity;
    assert!((want - 9.865_876_450_376_98e-10).abs() < 1e-22);
    let r = run_trials(&ParityErrorExperiment { cfg, basis: Basis::Diagonal }, 1_000_000, 99, None).unwrap();
    assert!(within_binomial_sigma(r.successes, r.trials, want, 3.0));
}
