//! One function per subcommand. Each returns a serializable result and a CSV
//! table; nothing here depends on the worker count.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use kerrsim::analysis::{
    error_model, fidelity, half_erfc, required_alpha, run_trials, trial_rng, trial_seed, within_binomial_sigma,
    wilson95, DetectorErrorExperiment, MonteCarloReport, ParityErrorExperiment, TrialRng,
};
use kerrsim::fock_oracle::crosscheck;
use kerrsim::gates::{bell_measure, cnot, parity_gate, Basis, BellLabel, Quadrature, Readout};
use kerrsim::homodyne::{peak_separation, Parity};
use kerrsim::{Error, GateConfig, HybridState, PolLabel, QubitId, QubitSpec, Unitary2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::{BasisArg, Command, ExperimentSpec, QuadratureArg};
use crate::CliError;

const CHUNK: u64 = 4096;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub result: serde_json::Value,
    pub table: Table,
    /// `Some(false)` when the command has a pass criterion and missed it.
    pub passed: Option<bool>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct McSummary {
    trials: u64,
    events: u64,
    point_estimate: f64,
    wilson95: [f64; 2],
}

impl From<&MonteCarloReport> for McSummary {
    fn from(r: &MonteCarloReport) -> Self {
        McSummary { trials: r.trials, events: r.successes, point_estimate: r.point_estimate, wilson95: [r.wilson95.0, r.wilson95.1] }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ErrorModelOut {
    alpha: f64,
    theta: f64,
    snr: f64,
    x0: f64,
    xd: f64,
    p_err_detector: f64,
    p_err_parity: f64,
    low_separation: bool,
}

fn error_model_out(cfg: &GateConfig) -> Result<ErrorModelOut, CliError> {
    let m = error_model(cfg.alpha(), cfg.theta())?;
    Ok(ErrorModelOut {
        alpha: m.alpha,
        theta: m.theta,
        snr: m.snr,
        x0: m.x0,
        xd: m.xd,
        p_err_detector: m.p_err_detector,
        p_err_parity: m.p_err_parity,
        low_separation: cfg.low_separation(),
    })
}

/// Folds trials in fixed-size chunks so that the result, including float
/// sums, is identical for every worker count.
fn fold_trials<A, I, S, M>(trials: u64, seed: u64, jobs: Option<usize>, init: I, step: S, merge: M) -> Result<A, CliError>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &mut TrialRng) -> kerrsim::Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = trials.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let mut rng = trial_rng(seed, i);
                    step(&mut acc, &mut rng).map_err(|e| Error::TrialFailed { index: i, source: Box::new(e) })?;
                }
                Ok(acc)
            })
            .collect::<Vec<kerrsim::Result<A>>>()
    };
    let parts = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::numerical(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut total = init();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

fn config(spec: &ExperimentSpec) -> Result<GateConfig, CliError> {
    Ok(GateConfig::new(spec.alpha, spec.theta())?.with_noise(spec.noise_sigma)?.with_seed(spec.seed))
}

/// Two-qubit input: a Bell label (`phi+`, `phi-`, `psi+`, `psi-`) or one
/// letter per qubit from `H V D A R L`.
pub fn parse_input(s: &str) -> Result<HybridState, CliError> {
    let bell = match s.to_ascii_lowercase().as_str() {
        "phi+" => Some(BellLabel::PhiPlus),
        "phi-" => Some(BellLabel::PhiMinus),
        "psi+" => Some(BellLabel::PsiPlus),
        "psi-" => Some(BellLabel::PsiMinus),
        _ => None,
    };
    if let Some(l) = bell {
        return Ok(l.state());
    }
    let r = FRAC_1_SQRT_2;
    let specs = s
        .chars()
        .map(|c| match c.to_ascii_uppercase() {
            'H' => Ok(QubitSpec::h()),
            'V' => Ok(QubitSpec::v()),
            'D' => Ok(QubitSpec::diagonal()),
            'A' => Ok(QubitSpec::anti_diagonal()),
            'R' => Ok(QubitSpec::Pol(Complex64::new(r, 0.0), Complex64::new(0.0, r))),
            'L' => Ok(QubitSpec::Pol(Complex64::new(r, 0.0), Complex64::new(0.0, -r))),
            other => Err(CliError::usage(format!("unknown polarization {other:?} in input {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if specs.len() != 2 {
        return Err(CliError::usage(format!("input must describe exactly two qubits, got {s:?}")));
    }
    Ok(HybridState::new_product_state(&specs)?)
}

/// Ideal projection of a probe-free two-qubit state onto one parity class.
fn ideal_parity_projection(input: &HybridState, basis: Basis, parity: Parity) -> kerrsim::Result<Option<HybridState>> {
    let h = Unitary2::hadamard();
    let rotate = |s: &HybridState| -> kerrsim::Result<HybridState> {
        if basis == Basis::Diagonal {
            s.apply_1q(QubitId(0), &h)?.apply_1q(QubitId(1), &h)
        } else {
            Ok(s.clone())
        }
    };
    let s = rotate(input)?;
    let keep: Vec<_> = s
        .branches()
        .iter()
        .filter(|b| (b.label()[0] == b.label()[1]) == (parity == Parity::Even))
        .map(|b| (b.label().to_vec(), b.weight()))
        .collect();
    let n2: f64 = keep.iter().map(|t| t.1.norm_sqr()).sum();
    if n2 < 1e-12 {
        return Ok(None);
    }
    let inv = 1.0 / n2.sqrt();
    let projected = HybridState::from_terms(2, keep.into_iter().map(|(l, w)| (l, w * inv)))?;
    rotate(&projected).map(Some)
}

fn ideal_cnot(input: &HybridState) -> kerrsim::Result<HybridState> {
    let flip = |l: PolLabel| if l == PolLabel::H { PolLabel::V } else { PolLabel::H };
    HybridState::from_terms(
        2,
        input.branches().iter().map(|b| {
            let (c, t) = (b.label()[0], b.label()[1]);
            (vec![c, if c == PolLabel::V { flip(t) } else { t }], b.weight())
        }),
    )
}

pub fn run(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Outcome, CliError> {
    match spec.command {
        Command::Detector => detector(spec, jobs),
        Command::Parity => parity(spec, jobs),
        Command::Bell => bell(spec, jobs),
        Command::Cnot => cnot_table(spec, jobs),
        Command::Sweep => sweep(spec),
        Command::Validate => validate(spec),
    }
}

fn detector(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let cfg = config(spec)?;
    let quadrature = match spec.quadrature {
        Some(QuadratureArg::X) => Quadrature::Position,
        _ => Quadrature::Momentum,
    };
    let exp = DetectorErrorExperiment { cfg, quadrature };
    let analytic = exp.analytic();
    let mc = run_trials(&exp, spec.trials, spec.seed, jobs)?;

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        error_model: ErrorModelOut,
        quadrature: Quadrature,
        analytic_error: f64,
        monte_carlo: McSummary,
        brackets_analytic: bool,
    }
    let out = Out {
        error_model: error_model_out(&cfg)?,
        quadrature,
        analytic_error: analytic,
        monte_carlo: (&mc).into(),
        brackets_analytic: mc.brackets(analytic),
    };
    let table = Table {
        header: vec!["quadrature", "trials", "errors", "rate", "wilson_lo", "wilson_hi", "analytic"],
        rows: vec![vec![
            format!("{quadrature:?}").to_lowercase(),
            mc.trials.to_string(),
            mc.successes.to_string(),
            num(mc.point_estimate),
            num(mc.wilson95.0),
            num(mc.wilson95.1),
            num(analytic),
        ]],
    };
    Ok(Outcome { result: serde_json::to_value(out).expect("serializable"), table, passed: None })
}

fn parity(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let cfg = config(spec)?;
    let basis = match spec.basis {
        Some(BasisArg::Diag) => Basis::Diagonal,
        _ => Basis::Rectilinear,
    };
    let model = error_model_out(&cfg)?;
    let herald = run_trials(&ParityErrorExperiment { cfg, basis }, spec.trials, trial_seed(spec.seed, 0), jobs)?;

    let input_text = spec.input.as_deref().unwrap_or("DD");
    let input = parse_input(input_text)?;
    let ideal_even = ideal_parity_projection(&input, basis, Parity::Even)?;
    let ideal_odd = ideal_parity_projection(&input, basis, Parity::Odd)?;

    #[derive(Default)]
    struct Acc {
        count: [u64; 2],
        fid: [f64; 2],
    }
    let acc = fold_trials(
        spec.trials,
        trial_seed(spec.seed, 1),
        jobs,
        Acc::default,
        |a, rng| {
            let mut ro = Readout::random(rng);
            let (out, s) = parity_gate(&input, QubitId(0), QubitId(1), basis, &cfg, &mut ro)?;
            let (k, ideal) = match out.parity {
                Parity::Even => (0, &ideal_even),
                Parity::Odd => (1, &ideal_odd),
            };
            a.count[k] += 1;
            if let Some(ideal) = ideal {
                a.fid[k] += fidelity(&s, ideal)?.value;
            }
            Ok(())
        },
        |t, p| {
            for k in 0..2 {
                t.count[k] += p.count[k];
                t.fid[k] += p.fid[k];
            }
        },
    )?;

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Class {
        herald: Parity,
        count: u64,
        fraction: f64,
        mean_fidelity: Option<f64>,
    }
    let classes: Vec<Class> = [(Parity::Even, &ideal_even), (Parity::Odd, &ideal_odd)]
        .iter()
        .enumerate()
        .map(|(k, (p, ideal))| Class {
            herald: *p,
            count: acc.count[k],
            fraction: acc.count[k] as f64 / spec.trials as f64,
            mean_fidelity: (ideal.is_some() && acc.count[k] > 0).then(|| acc.fid[k] / acc.count[k] as f64),
        })
        .collect();

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        error_model: ErrorModelOut,
        basis: Basis,
        herald_error: McSummary,
        herald_error_within_3_sigma: bool,
        input: String,
        conditional: Vec<Class>,
    }
    let table = Table {
        header: vec!["herald", "count", "fraction", "mean_fidelity"],
        rows: classes
            .iter()
            .map(|c| {
                vec![
                    format!("{:?}", c.herald).to_lowercase(),
                    c.count.to_string(),
                    num(c.fraction),
                    c.mean_fidelity.map(num).unwrap_or_default(),
                ]
            })
            .collect(),
    };
    let out = Out {
        herald_error_within_3_sigma: within_binomial_sigma(herald.successes, herald.trials, model.p_err_parity, 3.0),
        error_model: model,
        basis,
        herald_error: (&herald).into(),
        input: input_text.to_string(),
        conditional: classes,
    };
    Ok(Outcome { result: serde_json::to_value(out).expect("serializable"), table, passed: None })
}

fn bell(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let cfg = config(spec)?;
    let refs: Vec<HybridState> = BellLabel::ALL.iter().map(|l| l.state()).collect();

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Row {
        truth: String,
        counts: [u64; 4],
        accuracy: f64,
        mean_fidelity: f64,
    }
    let mut rows = Vec::new();
    for truth in BellLabel::ALL {
        let input = truth.state();
        let (counts, fid) = fold_trials(
            spec.trials,
            trial_seed(spec.seed, truth.index() as u64),
            jobs,
            || ([0u64; 4], 0.0f64),
            |a, rng| {
                let mut ro = Readout::random(rng);
                let (out, s) = bell_measure(&input, QubitId(0), QubitId(1), &cfg, &mut ro)?;
                a.0[out.label.index()] += 1;
                a.1 += fidelity(&s, &refs[out.label.index()])?.value;
                Ok(())
            },
            |t, p| {
                for k in 0..4 {
                    t.0[k] += p.0[k];
                }
                t.1 += p.1;
            },
        )?;
        rows.push(Row {
            truth: truth.to_string(),
            counts,
            accuracy: counts[truth.index()] as f64 / spec.trials as f64,
            mean_fidelity: fid / spec.trials as f64,
        });
    }

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        error_model: ErrorModelOut,
        labels: Vec<String>,
        trials_per_state: u64,
        confusion: Vec<Row>,
        min_accuracy: f64,
        min_mean_fidelity: f64,
    }
    let table = Table {
        header: vec!["truth", "phi+", "phi-", "psi+", "psi-", "accuracy", "mean_fidelity"],
        rows: rows
            .iter()
            .map(|r| {
                let mut v = vec![r.truth.clone()];
                v.extend(r.counts.iter().map(u64::to_string));
                v.push(num(r.accuracy));
                v.push(num(r.mean_fidelity));
                v
            })
            .collect(),
    };
    let out = Out {
        error_model: error_model_out(&cfg)?,
        labels: BellLabel::ALL.iter().map(|l| l.to_string()).collect(),
        trials_per_state: spec.trials,
        min_accuracy: rows.iter().map(|r| r.accuracy).fold(1.0, f64::min),
        min_mean_fidelity: rows.iter().map(|r| r.mean_fidelity).fold(1.0, f64::min),
        confusion: rows,
    };
    Ok(Outcome { result: serde_json::to_value(out).expect("serializable"), table, passed: None })
}

fn cnot_table(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let cfg = config(spec)?;
    let model = error_model_out(&cfg)?;
    // Two parity heralds plus the ancilla readout, all at the same separation.
    let bound = 3.0 * model.p_err_parity;

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Row {
        input: String,
        expected: String,
        trials: u64,
        correct: u64,
        failures: u64,
        failure_rate: f64,
        wilson95: [f64; 2],
        within_bound: bool,
    }
    let mut rows = Vec::new();
    let names = ["HH", "HV", "VH", "VV"];
    for (k, name) in names.iter().enumerate() {
        let input = parse_input(name)?;
        let expected = ideal_cnot(&input)?;
        let correct = fold_trials(
            spec.trials,
            trial_seed(spec.seed, k as u64),
            jobs,
            || 0u64,
            |a, rng| {
                let mut ro = Readout::random(rng);
                let (_, s) = cnot(&input, QubitId(0), QubitId(1), &cfg, &mut ro)?;
                if fidelity(&s, &expected)?.value >= 0.5 {
                    *a += 1;
                }
                Ok(())
            },
            |t, p| *t += p,
        )?;
        let failures = spec.trials - correct;
        let (lo, hi) = wilson95(failures, spec.trials);
        rows.push(Row {
            input: name.to_string(),
            expected: names[if k >= 2 { k ^ 1 } else { k }].to_string(),
            trials: spec.trials,
            correct,
            failures,
            failure_rate: failures as f64 / spec.trials as f64,
            wilson95: [lo, hi],
            within_bound: lo <= bound,
        });
    }

    let input_text = spec.input.as_deref().unwrap_or("DH");
    let input = parse_input(input_text)?;
    let ideal = ideal_cnot(&input)?;
    let fid = fold_trials(
        spec.trials,
        trial_seed(spec.seed, 4),
        jobs,
        || 0.0f64,
        |a, rng| {
            let mut ro = Readout::random(rng);
            let (_, s) = cnot(&input, QubitId(0), QubitId(1), &cfg, &mut ro)?;
            *a += fidelity(&s, &ideal)?.value;
            Ok(())
        },
        |t, p| *t += p,
    )?;

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Entangling {
        input: String,
        mean_fidelity: f64,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        error_model: ErrorModelOut,
        failure_bound: f64,
        truth_table: Vec<Row>,
        all_rows_within_bound: bool,
        entangling: Entangling,
    }
    let table = Table {
        header: vec!["input", "expected", "trials", "correct", "failures", "failure_rate", "bound", "within_bound"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.input.clone(),
                    r.expected.clone(),
                    r.trials.to_string(),
                    r.correct.to_string(),
                    r.failures.to_string(),
                    num(r.failure_rate),
                    num(bound),
                    r.within_bound.to_string(),
                ]
            })
            .collect(),
    };
    let out = Out {
        error_model: model,
        failure_bound: bound,
        all_rows_within_bound: rows.iter().all(|r| r.within_bound),
        truth_table: rows,
        entangling: Entangling { input: input_text.to_string(), mean_fidelity: fid / spec.trials as f64 },
    };
    Ok(Outcome { result: serde_json::to_value(out).expect("serializable"), table, passed: None })
}

/// Smallest coupling the resource table is extrapolated to.
const EXTRAPOLATION_THETA: f64 = 0.01;

fn sweep(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    let target = spec.target_xd.unwrap_or(8.0);
    let range = spec.theta_range.expect("sweep spec carries a theta range");

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Row {
        theta: f64,
        alpha: f64,
        photon_number: f64,
        xd: f64,
        p_err_parity: f64,
        extrapolated: bool,
    }
    let row = |theta: f64, extrapolated: bool| -> Result<Row, CliError> {
        let r = required_alpha(theta, target)?;
        let xd = peak_separation(r.alpha, theta);
        Ok(Row {
            theta,
            alpha: r.alpha,
            photon_number: r.photon_number,
            xd,
            p_err_parity: half_erfc(xd / (2.0 * SQRT_2)),
            extrapolated,
        })
    };
    let mut rows = range.points().into_iter().map(|t| row(t, false)).collect::<Result<Vec<_>, _>>()?;
    rows.push(row(EXTRAPOLATION_THETA, true)?);

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        target_xd: f64,
        rows: Vec<Row>,
    }
    let table = Table {
        header: vec!["theta", "alpha", "photon_number", "xd", "p_err_parity", "extrapolated"],
        rows: rows
            .iter()
            .map(|r| {
                vec![num(r.theta), num(r.alpha), num(r.photon_number), num(r.xd), num(r.p_err_parity), r.extrapolated.to_string()]
            })
            .collect(),
    };
    Ok(Outcome {
        result: serde_json::to_value(Out { target_xd: target, rows }).expect("serializable"),
        table,
        passed: None,
    })
}

pub const VALIDATE_DENSITY_TOL: f64 = 1e-8;
pub const VALIDATE_FIDELITY_TOL: f64 = 1e-10;

fn validate(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    let rep = crosscheck::validate(spec.alpha, spec.theta())?;
    let passed = rep.passes(VALIDATE_DENSITY_TOL, VALIDATE_FIDELITY_TOL);

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Case {
        name: String,
        density_linf: f64,
        infidelity: f64,
        truncation: usize,
        leakage: f64,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out {
        density_tolerance: f64,
        fidelity_tolerance: f64,
        max_density_linf: f64,
        max_infidelity: f64,
        passed: bool,
        cases: Vec<Case>,
    }
    let cases: Vec<Case> = rep
        .cases
        .iter()
        .map(|c| Case {
            name: c.name.clone(),
            density_linf: c.density_linf,
            infidelity: 1.0 - c.min_fidelity,
            truncation: c.truncation,
            leakage: c.leakage,
        })
        .collect();
    let table = Table {
        header: vec!["case", "density_linf", "infidelity", "truncation", "leakage"],
        rows: cases
            .iter()
            .map(|c| vec![c.name.clone(), num(c.density_linf), num(c.infidelity), c.truncation.to_string(), num(c.leakage)])
            .collect(),
    };
    let out = Out {
        density_tolerance: VALIDATE_DENSITY_TOL,
        fidelity_tolerance: VALIDATE_FIDELITY_TOL,
        max_density_linf: rep.max_density_linf,
        max_infidelity: 1.0 - rep.min_fidelity,
        passed,
        cases,
    };
    Ok(Outcome { result: serde_json::to_value(out).expect("serializable"), table, passed: Some(passed) })
}
