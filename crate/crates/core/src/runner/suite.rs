//! Verification suite for the Wigner solver: observables against the
//! analytic laws they must follow.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use crate::kernels::{dp_jump_kernel, dp_total_rate_quadrature, kramers_moyal_coefficient, CollapseParams, Smearing};
use crate::wigner::{
    collapse_step_diosi_penrose, collapse_step_fokker_planck, collapse_step_grw, collapse_step_kramers, observables,
    strang_step, GeneratorMode, GeneratorSpec, PolynomialPotential, WignerGrid,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    /// Free particle under the GRW master equation: `d<p^2>/dt = 2 D_p`.
    GrwVarGrowth,
    /// Master step versus its Fokker-Planck reduction for a narrow kernel.
    MasterVsFokkerPlanck,
    /// Kramers generator relaxes `var(p)` to `m k_B T_n`.
    KramersThermalization,
    /// Quadrature of the Gaussian-smeared gravitational kernel.
    DpTotalRate,
    /// Norm drift of one gravitational master step.
    DpNormConservation,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::GrwVarGrowth,
        Check::MasterVsFokkerPlanck,
        Check::KramersThermalization,
        Check::DpTotalRate,
        Check::DpNormConservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::GrwVarGrowth => "grw_var_growth",
            Check::MasterVsFokkerPlanck => "master_vs_fokker_planck",
            Check::KramersThermalization => "kramers_thermalization",
            Check::DpTotalRate => "dp_total_rate",
            Check::DpNormConservation => "dp_norm_conservation",
        }
    }

    /// Largest accepted relative error (absolute drift for the norm check).
    pub fn tolerance(self) -> f64 {
        match self {
            Check::GrwVarGrowth => 5e-3,
            Check::MasterVsFokkerPlanck => 1e-2,
            Check::KramersThermalization => 1e-2,
            Check::DpTotalRate => 1e-6,
            Check::DpNormConservation => 1e-9,
        }
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: Check,
    pub measured: f64,
    pub analytic: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Parameters the suite is tuned for: GRW `lambda = 1, alpha = 0.4`,
/// `hbar = m = 1`, dissipation `k = 0.1` (so `gamma = 0.2`, `m T_n = 0.5`),
/// gravity `G = 1, R0 = 1`.
pub fn default_suite_params() -> Result<CollapseParams> {
    CollapseParams::dissipative(1.0, 0.4, 1.0, 1.0, 0.1, 1)?.with_gravity(1.0, 1.0)
}

pub fn run_wigner_suite(params: &CollapseParams, selection: &[Check]) -> Result<Vec<CheckRow>> {
    let params = params.with_dims(1)?;
    selection
        .iter()
        .map(|&c| run_check(c, &params).map_err(|e| Error::InvalidParameter(format!("check {}: {e}", c.name()))))
        .collect()
}

fn row(check: Check, measured: f64, analytic: f64) -> CheckRow {
    let rel_error = if check == Check::DpNormConservation {
        (measured - analytic).abs()
    } else {
        ((measured - analytic) / analytic).abs()
    };
    CheckRow {
        check,
        measured,
        analytic,
        rel_error,
        pass: rel_error < check.tolerance(),
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn second_moment(g: &WignerGrid) -> f64 {
    let o = observables(g);
    o.var_p + o.mean_p * o.mean_p
}

/// `<p^2>` slope over `steps` applications of `step`.
fn moment_slope(
    mut grid: WignerGrid,
    steps: usize,
    dt: f64,
    mut step: impl FnMut(&mut WignerGrid) -> Result<()>,
) -> Result<f64> {
    let mut ts = vec![0.0];
    let mut ms = vec![second_moment(&grid)];
    for k in 1..=steps {
        step(&mut grid)?;
        ts.push(k as f64 * dt);
        ms.push(second_moment(&grid));
    }
    Ok(slope(&ts, &ms))
}

fn run_check(check: Check, params: &CollapseParams) -> Result<CheckRow> {
    let d = kramers_moyal_coefficient(1, params)?;
    match check {
        Check::GrwVarGrowth => {
            let grid = WignerGrid::gaussian(256, 256, (-20.0, 20.0), (-8.0, 8.0), (0.0, 0.0), (1.5, 1.0))?;
            let spec = GeneratorSpec::new(GeneratorMode::GrwMaster, Arc::new(PolynomialPotential::free()), *params)?;
            let dt = 0.01;
            let s = moment_slope(grid, 100, dt, |g| strang_step(g, &spec, dt))?;
            Ok(row(check, s, 2.0 * d))
        }
        Check::MasterVsFokkerPlanck => {
            // momentum spread 10 kernel widths: alpha hbar^2 = 0.01 var(p)
            let sp = 10.0 * (params.alpha * params.hbar * params.hbar).sqrt();
            let grid = WignerGrid::gaussian(2, 512, (-1.0, 1.0), (-8.0 * sp, 8.0 * sp), (0.0, 0.0), (0.5, sp))?;
            let dt = 0.05;
            let master = moment_slope(grid.clone(), 100, dt, |g| collapse_step_grw(g, params, dt))?;
            let fp = moment_slope(grid, 100, dt, |g| collapse_step_fokker_planck(g, params, dt))?;
            Ok(row(check, master, fp))
        }
        Check::KramersThermalization => {
            if !(params.gamma > 0.0) {
                return Err(Error::InvalidParameter("needs a positive damping rate".into()));
            }
            let target = params.mass * params.noise_temp;
            let sp = (4.0 * target).sqrt().max(1.0);
            let mut grid = WignerGrid::gaussian(2, 128, (-1.0, 1.0), (-6.0 * sp, 6.0 * sp), (0.0, 0.0), (0.5, sp))?;
            let dp = grid.dp();
            let dt = (0.2 * dp * dp / (params.gamma * target)).min(0.05 / params.gamma);
            let steps = (5.0 / params.gamma / dt).ceil() as usize;
            for _ in 0..steps {
                collapse_step_kramers(&mut grid, params, dt)?;
            }
            Ok(row(check, observables(&grid).var_p, target))
        }
        Check::DpTotalRate => {
            let p3 = params.with_dims(3)?;
            let k = dp_jump_kernel(&p3, Smearing::Gaussian)?;
            let closed = 8.0 * std::f64::consts::PI.sqrt() * p3.grav_const * p3.mass * p3.mass
                / (p3.hbar * p3.smear_radius);
            Ok(row(check, dp_total_rate_quadrature(&k)?, closed))
        }
        Check::DpNormConservation => {
            let mut grid = WignerGrid::gaussian(4, 512, (-5.0, 5.0), (-16.0, 16.0), (0.0, 0.0), (1.0, 1.5))?;
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let before = grid.norm();
                collapse_step_diosi_penrose(&mut grid, params, Smearing::Gaussian, 0.005)?;
                worst = worst.max(((grid.norm() - before) / before).abs());
            }
            Ok(row(check, worst, 0.0))
        }
    }
}

pub fn write_suite_csv<W: Write>(out: &mut W, comments: &[String], rows: &[CheckRow]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "check,measured,analytic,rel_error,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{}",
            r.check.name(),
            r.measured,
            r.analytic,
            r.rel_error,
            if r.pass { "pass" } else { "fail" }
        )?;
    }
    Ok(())
}
