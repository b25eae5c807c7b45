//! Self-check suite: each check compares an implementation against an
//! independent oracle and reports the worst residual it saw.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mode_dynamics::{
    complex_regime_interval, discriminant_tolerance, spectral_params, transition, transition_hb,
    EffectiveProgress, InnerConfig, Method, OuterHyperparams, Regime, Transition2x2,
};
use crate::restart_analysis::{chi_closed_form, chi_recurrence_with, crossover_forms};
use crate::scalar::rational;
use crate::trajectory_sim::{
    format_sig, simulate_full_quadratic, simulate_modes, DenseMatrix, QuadraticProblem,
    RestartSchedule, Spectrum, Trajectory,
};

/// Seed for every randomized check, so reports are reproducible.
pub const SUITE_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn bounded(name: &'static str, max_residual: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            passed: max_residual <= tolerance,
            max_residual,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Negates the determinant term of the `chi` recurrence so the suite
    /// can prove it notices.
    pub inject_fault: bool,
}

pub fn run_validation(opts: ValidationOptions) -> ValidationReport {
    let checks = vec![
        chi_agreement(opts.inject_fault),
        determinant_invariants(),
        regime_endpoints(),
        crossover_consistency(500),
        full_vs_mode(),
        soft_reductions(20),
    ];
    ValidationReport { checks }
}

/// `sigma in {0.05, ..., 1.0}`.
pub fn standard_sigmas() -> Vec<f64> {
    (1..=20).map(|i| f64::from(i) * 0.05).collect()
}
pub const STANDARD_BETAS: [f64; 5] = [0.5, 0.7, 0.9, 0.95, 0.99];
pub const STANDARD_NUS: [f64; 4] = [0.1, 0.5, 1.0, 1.5];
pub const STANDARD_K_MAX: usize = 200;

fn grid_transitions() -> Vec<Transition2x2<f64>> {
    let mut out = Vec::new();
    for kind in Method::ALL {
        for &beta in &STANDARD_BETAS {
            for &nu in &STANDARD_NUS {
                let h = OuterHyperparams::new(nu, beta).expect("grid values are valid");
                for s in standard_sigmas() {
                    let sigma = EffectiveProgress::new(s).expect("grid values are valid");
                    out.push(transition(kind, &sigma, &h));
                }
            }
        }
    }
    out
}

fn to_matrix2(t: &Transition2x2<f64>) -> Matrix2<f64> {
    let [a11, a12, a21, a22] = t.entries();
    Matrix2::new(*a11, *a12, *a21, *a22)
}

/// `|a - b| / max(1, |b|)`: relative for growing values, absolute once the
/// sequence has decayed below one.
pub fn scaled_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Worst `(recurrence, closed form)` disagreement against explicit matrix
/// powers over the standard grid, plus the number of complex cells.
pub fn chi_grid_residuals(inject_fault: bool) -> (f64, f64, usize) {
    let mut worst_rec = 0.0f64;
    let mut worst_closed = 0.0f64;
    let mut complex_cells = 0;
    for t in grid_transitions() {
        let series = chi_recurrence_with(&t, STANDARD_K_MAX, inject_fault);
        let sp = spectral_params(&t).ok().filter(|sp| sp.regime() == Regime::ComplexConjugate);
        complex_cells += usize::from(sp.is_some());
        let m = to_matrix2(&t);
        let mut power = Matrix2::identity();
        for k in 0..=STANDARD_K_MAX {
            let reference = power[(0, 0)];
            worst_rec = worst_rec.max(scaled_difference(series.chis()[k], reference));
            if let Some(sp) = &sp {
                let closed = chi_closed_form(sp, k as u32).expect("complex regime");
                worst_closed = worst_closed.max(scaled_difference(closed, reference));
            }
            power = m * power;
        }
    }
    (worst_rec, worst_closed, complex_cells)
}

fn chi_agreement(inject_fault: bool) -> CheckOutcome {
    let (rec, closed, cells) = chi_grid_residuals(inject_fault);
    CheckOutcome::bounded(
        "chi: matrix power vs recurrence vs closed form",
        rec.max(closed),
        1e-10,
        format!(
            "recurrence {rec:.3e}, closed form {closed:.3e} over {cells} complex cells, K <= {STANDARD_K_MAX}"
        ),
    )
}

fn determinant_invariants() -> CheckOutcome {
    // residuals in units of eps * beta
    let mut worst_ulps = 0.0f64;
    for kind in Method::ALL {
        for &beta in &STANDARD_BETAS {
            for &nu in &STANDARD_NUS {
                let h = OuterHyperparams::new(nu, beta).expect("grid values are valid");
                for s in standard_sigmas() {
                    let t = transition(kind, &EffectiveProgress::new(s).expect("valid"), &h);
                    let expected = match kind {
                        Method::HeavyBall => beta,
                        Method::Nesterov => beta * (1.0 - (1.0 - beta) * nu * s),
                    };
                    let ulps = (t.det() - expected).abs() / (f64::EPSILON * beta);
                    worst_ulps = worst_ulps.max(ulps);
                }
            }
        }
    }
    let mut exact_ok = true;
    for (num, den) in [(1, 2), (9, 10), (99, 100)] {
        let beta = rational(num, den);
        let h = OuterHyperparams::new(rational(3, 2), beta.clone()).expect("valid");
        for s in [rational(1, 20), rational(19, 20), rational(1, 1)] {
            let sigma = EffectiveProgress::new(s.clone()).expect("valid");
            let one = rational(1, 1);
            exact_ok &= transition(Method::HeavyBall, &sigma, &h).det() == beta;
            let nag = beta.clone() * (one.clone() - (one - beta.clone()) * rational(3, 2) * s);
            exact_ok &= transition(Method::Nesterov, &sigma, &h).det() == nag;
        }
    }
    let mut out = CheckOutcome::bounded(
        "determinant invariants",
        worst_ulps,
        8.0,
        format!("max {worst_ulps:.2} ulp of beta; exact rational determinants {}", if exact_ok { "match" } else { "differ" }),
    );
    out.passed &= exact_ok;
    out
}

/// Intervals the regime report is expected to print at two significant figures.
pub const PRINTED_INTERVALS: [(f64, &str, &str); 2] = [(0.9, "0.026", "38"), (0.99, "0.0025", "398")];

fn regime_endpoints() -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut all_critical = true;
    for &beta in &STANDARD_BETAS {
        for &nu in &STANDARD_NUS {
            let h = OuterHyperparams::new(nu, beta).expect("valid");
            let iv = complex_regime_interval(&h);
            for end in [iv.lo, iv.hi] {
                let t = transition_hb(&EffectiveProgress::synthetic(end).expect("positive"), &h);
                let tr = t.trace();
                let disc = tr * tr - 4.0 * t.det();
                worst = worst.max(disc.abs() / discriminant_tolerance(tr));
                all_critical &= matches!(spectral_params(&t), Ok(sp) if sp.regime() == Regime::Critical);
            }
        }
    }
    let mut printed_ok = true;
    for (beta, lo, hi) in PRINTED_INTERVALS {
        let iv = complex_regime_interval(&OuterHyperparams::new(1.0, beta).expect("valid"));
        printed_ok &= format_sig(iv.lo, 2) == lo && format_sig(iv.hi, 2) == hi;
    }
    let mut out = CheckOutcome::bounded(
        "complex-regime interval endpoints",
        worst,
        1.0,
        format!(
            "max |disc| / tolerance {worst:.3e}; endpoints critical: {all_critical}; printed values match: {printed_ok}"
        ),
    );
    out.passed &= all_critical && printed_ok;
    out
}

/// Agreement of the three crossover tests on random complex-regime samples.
/// Returns `(disagreements, samples checked, samples skipped for margin)`.
pub fn crossover_sample_disagreements(samples: usize, seed: u64) -> (usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut checked, mut skipped) = (0, 0, 0);
    while checked + skipped < samples {
        let kind = if rng.gen_bool(0.5) { Method::HeavyBall } else { Method::Nesterov };
        let h = OuterHyperparams::new(rng.gen_range(0.1..1.5), rng.gen_range(0.5..0.995)).expect("valid");
        let sigma = EffectiveProgress::new(rng.gen_range(0.01..=1.0)).expect("valid");
        let k = rng.gen_range(1..=64u32);
        let t = transition(kind, &sigma, &h);
        if !matches!(spectral_params(&t), Ok(sp) if sp.regime() == Regime::ComplexConjugate) {
            continue;
        }
        let forms = crossover_forms(&t, k).expect("complex regime");
        if forms.margin < 1e-9 {
            skipped += 1;
        } else {
            checked += 1;
            bad += usize::from(!forms.agree());
        }
    }
    (bad, checked, skipped)
}

fn crossover_consistency(samples: usize) -> CheckOutcome {
    let (bad, checked, skipped) = crossover_sample_disagreements(samples, SUITE_SEED);
    CheckOutcome::bounded(
        "crossover triple consistency",
        bad as f64,
        0.0,
        format!("{bad} disagreements in {checked} samples ({skipped} within 1e-9 of the boundary)"),
    )
}

/// Symmetric positive definite `n x n` matrix `A^T A / n + ridge I` with
/// uniform `[-1, 1]` entries in `A`.
pub fn random_spd(n: usize, ridge: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
    let mut h = a.transpose() * &a / n as f64;
    for i in 0..n {
        h[(i, i)] += ridge;
    }
    // exact symmetry regardless of summation order
    DMatrix::from_fn(n, n, |i, j| if i <= j { h[(i, j)] } else { h[(j, i)] })
}

/// Largest per-coordinate disagreement between the full-vector simulation
/// and the per-mode simulation rotated back from the eigenbasis, each
/// difference scaled by `max(|full|, ||x_t||_inf)`.
#[allow(clippy::too_many_arguments)]
pub fn full_vs_mode_residual(
    h: &DMatrix<f64>,
    x0: &[f64],
    workers: usize,
    inner: &InnerConfig<f64>,
    hyper: &OuterHyperparams<f64>,
    kind: Method,
    sched: &RestartSchedule<f64>,
    rounds: usize,
) -> Result<f64> {
    let n = h.nrows();
    let rows = (0..n).map(|i| (0..n).map(|j| h[(i, j)]).collect()).collect();
    let problem = QuadraticProblem::new(DenseMatrix::from_rows(rows)?, x0.to_vec(), workers)?;
    let full = simulate_full_quadratic(&problem, inner, hyper, kind, sched, rounds)?;

    let eig = SymmetricEigen::new(h.clone());
    let q = eig.eigenvectors;
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let coords = (0..n)
        .map(|j| (0..n).map(|i| q[(i, j)] * x0[i]).sum())
        .collect();
    let spec = Spectrum::derived(inner, &lambdas, vec![1.0; n])?.with_initial(coords)?;
    let modes = simulate_modes(&spec, hyper, kind, sched, rounds)?;
    Ok(trajectory_residual(&full, &modes, &q))
}

fn trajectory_residual(full: &Trajectory<f64>, modes: &Trajectory<f64>, q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    if full.records.len() != modes.records.len() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for (rf, rm) in full.records.iter().zip(&modes.records) {
        let rotate = |pick: fn(&crate::mode_dynamics::ModeState<f64>) -> f64| -> Vec<f64> {
            (0..n)
                .map(|i| (0..n).map(|j| q[(i, j)] * pick(&rm.states[j])).sum())
                .collect()
        };
        let xs = rotate(|z| z.x);
        let ms = rotate(|z| z.m);
        let scale = rf.states.iter().fold(f64::MIN_POSITIVE, |a, z| a.max(z.x.abs()));
        for i in 0..n {
            let zf = &rf.states[i];
            worst = worst.max((zf.x - xs[i]).abs() / zf.x.abs().max(scale));
            worst = worst.max((zf.m - ms[i]).abs() / zf.m.abs().max(scale));
        }
    }
    worst
}

fn full_vs_mode() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let n = 8;
    let mut worst = 0.0f64;
    let mut failure = None;
    let hyper = OuterHyperparams::new(1.0, 0.9).expect("valid");
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| 0.1 + 0.25 * i as f64));
    let dense = random_spd(n, 0.05, &mut rng);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    for h in [&diag, &dense] {
        let lmax = SymmetricEigen::new(h.clone()).eigenvalues.max();
        for steps in [4, 16] {
            let inner = InnerConfig::new(0.95 / lmax, steps).expect("valid");
            for kind in Method::ALL {
                for sched in [RestartSchedule::NoRestart, RestartSchedule::Global { period: 5 }] {
                    match full_vs_mode_residual(h, &x0, 3, &inner, &hyper, kind, &sched, 50) {
                        Ok(r) => worst = worst.max(r),
                        Err(e) => failure = Some(e.to_string()),
                    }
                }
            }
        }
    }
    let mut out = CheckOutcome::bounded(
        "full quadratic vs eigenbasis modes",
        worst,
        1e-8,
        match &failure {
            Some(e) => format!("simulation error: {e}"),
            None => "n = 8 diagonal and dense SPD, S in {4, 16}, 3 workers, 50 rounds".to_string(),
        },
    );
    out.passed &= failure.is_none();
    out
}

/// Whether two trajectories carry bit-identical states and losses.
pub fn bit_identical(a: &Trajectory<f64>, b: &Trajectory<f64>) -> bool {
    a.diverged_at == b.diverged_at
        && a.records.len() == b.records.len()
        && a.records.iter().zip(&b.records).all(|(ra, rb)| {
            ra.loss.to_bits() == rb.loss.to_bits()
                && ra.states.len() == rb.states.len()
                && ra.states.iter().zip(&rb.states).all(|(za, zb)| {
                    za.x.to_bits() == zb.x.to_bits() && za.m.to_bits() == zb.m.to_bits()
                })
        })
}

/// Counts configurations where a degenerate soft restart is not
/// bit-identical to its hard counterpart.
pub fn soft_reduction_mismatches(configs: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..configs {
        let modes = rng.gen_range(1..=6);
        let sigmas = (0..modes).map(|_| rng.gen_range(0.01..=1.0)).collect();
        let weights = (0..modes).map(|_| rng.gen_range(0.1..=2.0)).collect();
        let spec = Spectrum::direct(sigmas, weights)?;
        let h = OuterHyperparams::new(rng.gen_range(0.1..=1.5), rng.gen_range(0.0..0.99))?;
        let kind = if rng.gen_bool(0.5) { Method::HeavyBall } else { Method::Nesterov };
        let period = rng.gen_range(1..=20);
        let horizon = rng.gen_range(10..=150);
        let run = |s: RestartSchedule<f64>| simulate_modes(&spec, &h, kind, &s, horizon);
        let keep = run(RestartSchedule::Soft { period, retain: 1.0, inject: 0.0 })?;
        let none = run(RestartSchedule::NoRestart)?;
        let zero = run(RestartSchedule::Soft { period, retain: 0.0, inject: 0.0 })?;
        let hard = run(RestartSchedule::Global { period })?;
        mismatches += usize::from(!bit_identical(&keep, &none));
        mismatches += usize::from(!bit_identical(&zero, &hard));
    }
    Ok(mismatches)
}

fn soft_reductions(configs: usize) -> CheckOutcome {
    match soft_reduction_mismatches(configs, SUITE_SEED) {
        Ok(bad) => CheckOutcome::bounded(
            "soft restart reductions",
            bad as f64,
            0.0,
            format!("{bad} mismatches over {configs} random configurations"),
        ),
        Err(e) => CheckOutcome {
            name: "soft restart reductions",
            passed: false,
            max_residual: f64::INFINITY,
            tolerance: 0.0,
            detail: format!("simulation error: {e}"),
        },
    }
}
