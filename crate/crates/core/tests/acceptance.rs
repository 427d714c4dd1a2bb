//! Acceptance criteria 1-11. Each test prints one `PASS`/`FAIL` line with the
//! measured value and its pinned tolerance, then asserts.
//!
//! Criteria 7 and 8 share one scaled reversal experiment (n = 16384,
//! t_rev = 50), which takes several minutes on a single core.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use collapse_core::analysis::{factorization_with_null, kinetic_temperature, FactorizationOptions};
use collapse_core::kernels::{csl_rate_from_xi, grw_momentum_kernel, CollapseParams};
use collapse_core::md::potential::{derivative, CUTOFF};
use collapse_core::md::{initial_system, reverse_momenta, run, DynamicsSpec, ParticleSystem};
use collapse_core::runner::protocol::{evaluate, run_protocol, ProtocolReport};
use collapse_core::runner::{convert_units, default_suite_params, run_wigner_suite, Check, RunConfig, Species};

/// Pinned tolerances.
const GRW_VAR_TOL: f64 = 5e-3;
const MASTER_FP_TOL: f64 = 1e-2;
const THERMALIZATION_TOL: f64 = 2e-2;
const DP_RATE_TOL: f64 = 1e-6;
const DP_NORM_TOL: f64 = 1e-9;
const SMOOTHNESS_TOL: f64 = 1e-10;
const RETRACE_TOL: f64 = 1e-6;
const RELAXATION_LIMIT: f64 = 0.5;
const RETURN_LIMIT: f64 = 0.05;
const SIG_FIGS_4: f64 = 5e-4;
const STANDARD_ERRORS: f64 = 3.0;
const SUITE_BUDGET: Duration = Duration::from_secs(30);
const EXPERIMENT_BUDGET: Duration = Duration::from_secs(15 * 60);

/// Criteria run one at a time so wall-clock budgets measure a single workload.
fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn line(criterion: u32, name: &str, pass: bool, detail: String) -> bool {
    // straight to the stdout handle: libtest captures print! but not this
    let text = format!("criterion {criterion:>2} {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(text.as_bytes()).unwrap();
    pass
}

fn suite_row(check: Check) -> collapse_core::runner::CheckRow {
    run_wigner_suite(&default_suite_params().unwrap(), &[check]).unwrap().remove(0)
}

#[test]
fn criterion_01_grw_momentum_diffusion() {
    let _serial = exclusive();
    let started = Instant::now();
    let row = suite_row(Check::GrwVarGrowth);
    let elapsed = started.elapsed();
    // 2 D_p = 2 lambda alpha hbar^2 / 4 with lambda = 1, alpha = 0.4, hbar = 1
    let oracle = 2.0 * 1.0 * 0.4 * 1.0 / 4.0;
    assert!((row.analytic - oracle).abs() < 1e-15);
    let pass = row.rel_error < GRW_VAR_TOL && elapsed < SUITE_BUDGET;
    assert!(line(
        1,
        "grw_var_growth",
        pass,
        format!(
            "slope {:.6} vs 2D_p {oracle:.6}, rel err {:.2e} (tol {GRW_VAR_TOL:.0e}), {:.1} s (budget {} s)",
            row.measured,
            row.rel_error,
            elapsed.as_secs_f64(),
            SUITE_BUDGET.as_secs()
        )
    ));
}

#[test]
fn criterion_02_master_vs_fokker_planck() {
    let _serial = exclusive();
    let p = default_suite_params().unwrap();
    // the check's momentum spread is ten kernel widths: alpha hbar^2 = 0.01 var(p)
    let sp = 10.0 * (p.alpha * p.hbar * p.hbar).sqrt();
    assert!(p.alpha * p.hbar * p.hbar <= 0.01 * sp * sp * (1.0 + 1e-12));
    let row = suite_row(Check::MasterVsFokkerPlanck);
    assert!(line(
        2,
        "master_vs_fokker_planck",
        row.rel_error < MASTER_FP_TOL,
        format!(
            "master {:.6} vs Fokker-Planck {:.6} per unit time, rel err {:.2e} (tol {MASTER_FP_TOL:.0e})",
            row.measured, row.analytic, row.rel_error
        )
    ));
}

#[test]
fn criterion_03_dissipative_thermalization() {
    let _serial = exclusive();
    let p = default_suite_params().unwrap();
    // T_n = hbar^2 / (8 m k r_c^2) = alpha / (8 k) for hbar = m = 1
    assert!((p.noise_temp - 0.4 / (8.0 * 0.1)).abs() < 1e-15);
    let row = suite_row(Check::KramersThermalization);
    let wigner_ok = row.rel_error < THERMALIZATION_TOL;

    // force-free stochastic gas, n = 10^4: burn in for 5 / gamma, then average
    // snapshots 2 / gamma apart (temperature correlation e^-4 between them)
    let (t_n, gamma, dt): (f64, f64, f64) = (0.5863, 0.5, 0.01);
    let spec = DynamicsSpec::dissipative(dt, (2.0 * gamma * t_n).sqrt(), t_n).force_free();
    let n = 10_000;
    let snapshots = 10;
    let l = (n as f64 / 0.7).sqrt();
    let mut sys = initial_system(n, [l, l], 0.85, spec, 11).unwrap();
    let burn_in = (5.0 / gamma / dt).ceil() as u64;
    let spacing = (2.0 / gamma / dt).ceil() as u64;
    run(&mut sys, burn_in).unwrap();
    let mut t = kinetic_temperature(&sys);
    for _ in 1..snapshots {
        run(&mut sys, spacing).unwrap();
        t += kinetic_temperature(&sys);
    }
    t /= snapshots as f64;
    // each snapshot averages 2n components: standard error T / sqrt(n snapshots)
    let se = t_n / ((n * snapshots) as f64).sqrt();
    let rel = (t - t_n).abs() / t_n;
    let md_ok = rel < THERMALIZATION_TOL && (t - t_n).abs() < STANDARD_ERRORS * se;
    assert!(line(
        3,
        "dissipative_thermalization",
        wigner_ok && md_ok,
        format!(
            "Kramers var(p) {:.5} vs m T_n {:.5} (rel {:.2e}); MD T {t:.5} vs T_n {t_n}, mean of {snapshots} snapshots from t = {:.1} (rel {rel:.2e}, {:.2} SE); tol {THERMALIZATION_TOL:.0e} and {STANDARD_ERRORS} SE",
            row.measured,
            row.analytic,
            row.rel_error,
            burn_in as f64 * dt,
            (t - t_n).abs() / se
        )
    ));
}

#[test]
fn criterion_04_diosi_penrose_kernel_audit() {
    let _serial = exclusive();
    let rate = suite_row(Check::DpTotalRate);
    let p = default_suite_params().unwrap();
    let closed = 8.0 * std::f64::consts::PI.sqrt() * p.grav_const * p.mass * p.mass / (p.hbar * p.smear_radius);
    assert!((rate.analytic - closed).abs() < 1e-14 * closed);
    let norm = suite_row(Check::DpNormConservation);
    assert!(line(
        4,
        "diosi_penrose_kernel",
        rate.rel_error < DP_RATE_TOL && norm.measured < DP_NORM_TOL,
        format!(
            "total rate {:.12} vs 8 sqrt(pi) G m^2/(hbar R0) = {closed:.12} (rel {:.2e}, tol {DP_RATE_TOL:.0e}); worst norm drift per step {:.2e} (tol {DP_NORM_TOL:.0e})",
            rate.measured, rate.rel_error, norm.measured
        )
    ));
}

#[test]
fn criterion_05_potential_smoothness() {
    let _serial = exclusive();
    let worst_at_cutoff = (0..=4).map(|k| derivative(CUTOFF, k).abs()).fold(0.0, f64::max);
    // each exact derivative against a central difference of the one below
    let h = 1e-4;
    let mut worst_fd: f64 = 0.0;
    for k in 1..=4 {
        for i in 0..=50 {
            let r = 1.0 + 2.5 * i as f64 / 50.0;
            let fd = (derivative(r + h, k - 1) - derivative(r - h, k - 1)) / (2.0 * h);
            let exact = derivative(r, k);
            worst_fd = worst_fd.max((fd - exact).abs() / exact.abs().max(1.0));
        }
    }
    let pass = worst_at_cutoff < SMOOTHNESS_TOL && worst_fd < 1e-5;
    assert!(line(
        5,
        "potential_smoothness",
        pass,
        format!(
            "max |U^(k)(3.5)|, k = 0..4: {worst_at_cutoff:.2e} (tol {SMOOTHNESS_TOL:.0e}); exact vs central difference (h = 1e-4) worst rel {worst_fd:.2e} (tol 1e-5)"
        )
    ));
}

#[test]
fn criterion_06_deterministic_retrace() {
    let _serial = exclusive();
    let n = 1000;
    let l = (n as f64 / 0.7).sqrt();
    let mut sys = initial_system(n, [l, l], 0.75, DynamicsSpec::deterministic(0.0025), 3).unwrap();
    let start = sys.positions.clone();
    run(&mut sys, 10_000).unwrap();
    reverse_momenta(&mut sys);
    run(&mut sys, 10_000).unwrap();
    let min_image = |d: f64| d - l * (d / l).round();
    let worst = sys
        .positions
        .iter()
        .zip(&start)
        .flat_map(|(a, b)| [min_image(a[0] - b[0]).abs(), min_image(a[1] - b[1]).abs()])
        .fold(0.0, f64::max);
    assert!(line(
        6,
        "deterministic_retrace",
        worst < RETRACE_TOL,
        format!("n = {n}, 10^4 steps each way: max position deviation {worst:.3e} (tol {RETRACE_TOL:.0e})")
    ));
}

struct Experiment {
    report: ProtocolReport,
    elapsed: Duration,
}

fn experiment() -> &'static Experiment {
    static RUN: OnceLock<Experiment> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            output: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        assert_eq!((cfg.n, cfg.density, cfg.dt, cfg.t_rev, cfg.a_nd), (16384, 0.7, 0.0025, 50.0, 1e-4));
        assert_eq!((cfg.sigma_left, cfg.sigma_right), (0.75, 0.85));
        let started = Instant::now();
        run_protocol(&cfg).unwrap();
        let elapsed = started.elapsed();
        let report = evaluate(dir.path()).unwrap();
        Experiment { report, elapsed }
    })
}

#[test]
fn criterion_07_scaled_reversal_experiment() {
    let _serial = exclusive();
    let e = experiment();
    let r = &e.report;
    let relaxes = r.relaxation_ratio <= RELAXATION_LIMIT;
    let returns = r.deterministic_return < RETURN_LIMIT;
    let stochastic_ok = r.stochastic_vs_deterministic.iter().all(|(_, d)| *d < r.deterministic_vs_relaxed);
    let in_budget = e.elapsed <= EXPERIMENT_BUDGET;
    let stochastic: Vec<String> = r
        .stochastic_vs_deterministic
        .iter()
        .map(|(m, d)| format!("|{} - det| {d:.4e}", m.name()))
        .collect();
    let pass = line(
        7,
        "scaled_reversal_experiment",
        relaxes && returns && stochastic_ok && in_budget,
        format!(
            "(a) seam contrast ratio {:.3} (limit {RELAXATION_LIMIT}); (b) |det - joined| / gap {:.3e} (limit {RETURN_LIMIT}); (c) {} vs |det - relaxed| {:.4e}; runtime {:.0} s (budget {} s)",
            r.relaxation_ratio,
            r.deterministic_return,
            stochastic.join(", "),
            r.deterministic_vs_relaxed,
            e.elapsed.as_secs_f64(),
            EXPERIMENT_BUDGET.as_secs()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_mode_deviation_grows_with_wavenumber() {
    let _serial = exclusive();
    let r = &experiment().report;
    let dev = |n: u32| r.mode_deviation.iter().find(|m| m.0 == n).unwrap().1;
    assert!(line(
        8,
        "mode_deviation_trend",
        dev(14) > dev(1),
        format!(
            "time-integrated ||e(k)|_det - |e(k)|_grw|: n_x = 1 {:.4e}, n_x = 4 {:.4e}, n_x = 14 {:.4e}",
            dev(1),
            dev(4),
            dev(14)
        )
    ));
}

#[test]
fn criterion_09_unit_conversion() {
    let _serial = exclusive();
    let r = convert_units(&RunConfig::default(), &Species::argon()).unwrap();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let errs = [rel(r.tau, 2.151e-12), rel(r.d_p, 2.554e-43), rel(r.t_n, 70.356)];
    assert!(line(
        9,
        "unit_conversion",
        errs.iter().all(|e| *e < SIG_FIGS_4),
        format!(
            "tau {:.4e} s, D_p {:.4e} J^2 s/m^2, T_n {:.3} K; rel errors {:.1e} {:.1e} {:.1e} (tol {SIG_FIGS_4:.0e})",
            r.tau, r.d_p, r.t_n, errs[0], errs[1], errs[2]
        )
    ));
}

#[test]
fn criterion_10_csl_grw_identity() {
    let _serial = exclusive();
    let mut all = true;
    for (xi, alpha) in [(1.0, 1e14), (0.5, 4.0 * std::f64::consts::PI), (3.0, 0.2)] {
        let lambda = csl_rate_from_xi(xi, alpha).unwrap();
        let expected = xi * (alpha / (4.0 * std::f64::consts::PI)).powf(1.5);
        let mapped = CollapseParams::grw(lambda, alpha, 1.0, 1.0, 3).unwrap();
        let direct = CollapseParams::grw(expected, alpha, 1.0, 1.0, 3).unwrap();
        all &= mapped == direct && grw_momentum_kernel(&mapped).unwrap() == grw_momentum_kernel(&direct).unwrap();
    }
    assert!(line(
        10,
        "csl_grw_identity",
        all,
        "mapped-rate CSL parameters and kernel bitwise equal to GRW with lambda = xi (alpha/4pi)^1.5".into()
    ));
}

#[test]
fn criterion_11_molecular_chaos() {
    let _serial = exclusive();
    let (amp, dt) = (1.0, 0.01);
    let n = 10_000;
    let l = (n as f64 / 0.7).sqrt();
    let spec = DynamicsSpec::grw_noise(dt, amp).force_free();
    let mut sys: ParticleSystem = initial_system(n, [l, l], 0.75, spec, 21).unwrap();
    let v0 = sys.velocities.clone();
    let opts = FactorizationOptions { seed: 4, ..Default::default() };
    let mut ok = true;
    let mut rows = Vec::new();
    for k in 0..=4 {
        if k > 0 {
            run(&mut sys, 100).unwrap();
        }
        let t = k as f64 * 100.0 * dt;
        let f = factorization_with_null(&sys, 16, &opts).unwrap();
        let z = (f.value - f.null_mean) / f.null_sd;
        // increments are independent of the start: var(dv) = A^2 t per component
        let inc = sys
            .velocities
            .iter()
            .zip(&v0)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum::<f64>()
            / (2 * n) as f64;
        let expected = amp * amp * t;
        let se = expected / (n as f64).sqrt();
        let var_ok = k == 0 || (inc - expected).abs() < STANDARD_ERRORS * se;
        ok &= z.abs() < STANDARD_ERRORS && var_ok;
        rows.push(format!("t={t:.0}: z={z:+.2}, var(dv)={inc:.4} vs {expected:.1}"));
    }
    assert!(line(
        11,
        "molecular_chaos",
        ok,
        format!("diagnostic vs permutation null and linear var growth ({STANDARD_ERRORS} SE): {}", rows.join("; "))
    ));
}
