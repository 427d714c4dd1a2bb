//! Collapse and diffusion generators acting in momentum.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::WignerGrid;
use crate::kernels::{
    dissipative_kernel_expanded, dp_jump_kernel, kramers_moyal_coefficient, position_rep_multiplier, CollapseParams,
    MomentumKernel, Smearing,
};
use crate::{Error, Result};

/// Largest tolerated multiplier at the Nyquist frequency of the padded DFT;
/// above this the Gaussian kernel is not resolved by the momentum grid.
const NYQUIST_MULTIPLIER_LIMIT: f64 = 1e-10;
const LOST_MASS_LIMIT: f64 = 1e-6;

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::StepSize(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// One explicit step of the GRW master equation,
/// `W <- W - dt lambda (W - K * W)`, with the momentum convolution done by DFT.
pub fn collapse_step_grw(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    grw_collapse(grid, params, dt)?;
    grid.time += dt;
    Ok(())
}

pub(crate) fn grw_collapse(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    check_dt(dt)?;
    params.validate()?;
    if params.lambda * dt > 0.1 {
        return Err(Error::StepSize(format!("lambda dt = {} exceeds 0.1", params.lambda * dt)));
    }
    if params.lambda == 0.0 {
        return Ok(());
    }
    let mut smeared = grid.clone();
    convolve_grw_kernel(&mut smeared, params)?;
    let rate = params.lambda * dt;
    for (w, k) in grid.values.iter_mut().zip(&smeared.values) {
        *w -= rate * (*w - k);
    }
    Ok(())
}

/// Replaces every momentum row by its convolution with the GRW kernel
/// (one complete collapse event).
pub fn convolve_grw_kernel(grid: &mut WignerGrid, params: &CollapseParams) -> Result<()> {
    let np = grid.np;
    let dp = grid.dp();
    let width_sq = params.alpha * params.hbar * params.hbar;
    let sigma = (width_sq / 2.0).sqrt();
    let pad = (12.0 * sigma / dp).ceil() as usize + 1;
    let m = (np + 2 * pad).next_power_of_two();
    let nyquist_x = PI * params.hbar / dp;
    if position_rep_multiplier(params, nyquist_x) > NYQUIST_MULTIPLIER_LIMIT {
        return Err(Error::Resolution(format!(
            "GRW kernel width {:.3e} is not resolved by momentum spacing {dp:.3e}",
            width_sq.sqrt()
        )));
    }
    let multipliers: Vec<f64> = (0..m)
        .map(|k| {
            let ks = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            position_rep_multiplier(params, 2.0 * PI * params.hbar * ks / (m as f64 * dp))
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let total_before = grid.values.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lost = 0.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let scale = 1.0 / m as f64;
    for i in 0..grid.nx {
        let row = &mut grid.values[i * np..(i + 1) * np];
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (j, &w) in row.iter().enumerate() {
            buf[pad + j].re = w;
        }
        fwd.process(&mut buf);
        for (c, &mk) in buf.iter_mut().zip(&multipliers) {
            *c *= mk * scale;
        }
        inv.process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            if k < pad || k >= pad + np {
                lost += c.re;
            }
        }
        for (j, w) in row.iter_mut().enumerate() {
            *w = buf[pad + j].re;
        }
    }
    let fraction = lost.abs() / total_before;
    if fraction > LOST_MASS_LIMIT {
        return Err(Error::DomainTooSmall { lost: fraction });
    }
    Ok(())
}

/// `dW/dt = d/dp (gamma p W + D dW/dp)` in flux form with zero flux at both walls.
fn drift_diffusion(grid: &mut WignerGrid, gamma: f64, diffusion: f64, dt: f64) -> Result<()> {
    check_dt(dt)?;
    let dp = grid.dp();
    if dt * diffusion / (dp * dp) > 0.25 {
        return Err(Error::StepSize(format!(
            "dt D / dp^2 = {} exceeds 0.25",
            dt * diffusion / (dp * dp)
        )));
    }
    if dt * gamma > 0.1 {
        return Err(Error::StepSize(format!("dt gamma = {} exceeds 0.1", dt * gamma)));
    }
    let np = grid.np;
    let p_face: Vec<f64> = (0..np - 1).map(|j| grid.p_min + (j + 1) as f64 * dp).collect();
    let c = dt / dp;
    grid.values.par_chunks_mut(np).for_each(|row| {
        // F_{j+1/2}: flux from column j to j+1
        let flux: Vec<f64> = (0..np - 1)
            .map(|j| -gamma * p_face[j] * 0.5 * (row[j] + row[j + 1]) - diffusion * (row[j + 1] - row[j]) / dp)
            .collect();
        for j in 0..np {
            let in_left = if j > 0 { flux[j - 1] } else { 0.0 };
            let out_right = if j + 1 < np { flux[j] } else { 0.0 };
            row[j] += c * (in_left - out_right);
        }
    });
    Ok(())
}

/// Momentum diffusion with the per-axis coefficient `lambda alpha hbar^2 / 4`.
pub fn collapse_step_fokker_planck(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    fokker_planck(grid, params, dt)?;
    grid.time += dt;
    Ok(())
}

pub(crate) fn fokker_planck(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    let d = kramers_moyal_coefficient(1, params)?;
    drift_diffusion(grid, 0.0, d, dt)
}

/// Kramers generator `gamma d_p(p W) + gamma m k_B T_n d_p^2 W`.
pub fn collapse_step_kramers(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    kramers(grid, params, dt)?;
    grid.time += dt;
    Ok(())
}

pub(crate) fn kramers(grid: &mut WignerGrid, params: &CollapseParams, dt: f64) -> Result<()> {
    let (gamma, d) = dissipative_kernel_expanded(params)?;
    drift_diffusion(grid, gamma, d, dt)
}

/// Caldeira-Leggett form in the high-temperature limit: friction `gamma`
/// towards zero momentum plus diffusion `gamma m k_B T_bath`.
pub fn caldeira_leggett_step(grid: &mut WignerGrid, gamma: f64, mass: f64, bath_temp: f64, dt: f64) -> Result<()> {
    if !(gamma >= 0.0 && mass > 0.0 && bath_temp >= 0.0) {
        return Err(Error::InvalidParameter("need gamma >= 0, mass > 0, bath_temp >= 0".into()));
    }
    drift_diffusion(grid, gamma, gamma * mass * bath_temp, dt)?;
    grid.time += dt;
    Ok(())
}

/// Gravitational jump kernel tabulated on momentum offsets `k dp`,
/// `|k| < np`, as cell averages of its single-axis marginal.
#[derive(Debug, Clone)]
pub struct JumpTable {
    pub np: usize,
    pub dp: f64,
    /// `values[k + np - 1]` is the mean kernel density over the offset cell `k`.
    pub values: Vec<f64>,
}

impl JumpTable {
    pub fn new(kernel: &MomentumKernel, np: usize, dp: f64) -> Result<Self> {
        // int_0^b K = b * cell_average(b)
        let cumulative = |b: f64| -> Result<f64> {
            if b == 0.0 {
                Ok(0.0)
            } else {
                Ok(b * kernel.axis_cell_average(b)?)
            }
        };
        let mut half = Vec::with_capacity(np);
        // cell 0 spans [-dp/2, dp/2]; its mean is the finite cell average of the log singularity
        half.push(kernel.axis_cell_average(0.5 * dp)?);
        let mut prev = cumulative(0.5 * dp)?;
        for k in 1..np {
            let next = cumulative((k as f64 + 0.5) * dp)?;
            half.push(((next - prev) / dp).max(0.0));
            prev = next;
        }
        let mut values = vec![0.0; 2 * np - 1];
        for k in 0..np {
            values[np - 1 + k] = half[k];
            values[np - 1 - k] = half[k];
        }
        Ok(Self { np, dp, values })
    }

    pub fn at(&self, offset: isize) -> f64 {
        self.values[(offset + self.np as isize - 1) as usize]
    }

    /// `dp sum_k K_k`, the rate captured by the table.
    pub fn total_rate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dp
    }

    /// `dp sum_k (k dp)^2 K_k`.
    pub fn second_moment(&self) -> f64 {
        let n = self.np as isize;
        (-(n - 1)..n).map(|k| (k as f64 * self.dp).powi(2) * self.at(k)).sum::<f64>() * self.dp
    }

    /// One explicit step of gain minus loss, both restricted to the grid so
    /// that the discrete norm is conserved.
    pub fn apply(&self, grid: &mut WignerGrid, dt: f64) -> Result<()> {
        if grid.np != self.np || (grid.dp() - self.dp).abs() > 1e-12 * self.dp {
            return Err(Error::InvalidParameter("jump table does not match the grid".into()));
        }
        let np = self.np;
        let dp = self.dp;
        let loss_rate: Vec<f64> = (0..np)
            .map(|j| (0..np).map(|i| self.at(i as isize - j as isize)).sum::<f64>() * dp)
            .collect();
        grid.values.par_chunks_mut(np).for_each(|row| {
            let old = row.to_vec();
            for (i, w) in row.iter_mut().enumerate() {
                let mut gain = 0.0;
                for (j, &wj) in old.iter().enumerate() {
                    gain += self.at(i as isize - j as isize) * wj;
                }
                *w += dt * (gain * dp - loss_rate[i] * old[i]);
            }
        });
        Ok(())
    }
}

/// One explicit step of the single-particle gravitational master equation
/// along one axis.
pub fn collapse_step_diosi_penrose(
    grid: &mut WignerGrid,
    params: &CollapseParams,
    smearing: Smearing,
    dt: f64,
) -> Result<()> {
    diosi_penrose(grid, params, smearing, dt)?;
    grid.time += dt;
    Ok(())
}

pub(crate) fn diosi_penrose(grid: &mut WignerGrid, params: &CollapseParams, smearing: Smearing, dt: f64) -> Result<()> {
    check_dt(dt)?;
    let table = diosi_penrose_table(grid, params, smearing)?;
    if params.grav_const == 0.0 {
        return Ok(());
    }
    let rate = table.total_rate();
    if rate * dt > 0.1 {
        return Err(Error::StepSize(format!("total jump rate * dt = {} exceeds 0.1", rate * dt)));
    }
    table.apply(grid, dt)
}

/// Tabulates the gravitational kernel for `grid`, checking that the grid resolves it.
pub fn diosi_penrose_table(grid: &WignerGrid, params: &CollapseParams, smearing: Smearing) -> Result<JumpTable> {
    let p3 = params.with_dims(3)?;
    let kernel = dp_jump_kernel(&p3, smearing)?;
    let width = params.hbar / params.smear_radius;
    if width < 2.0 * grid.dp() {
        return Err(Error::Resolution(format!(
            "kernel width hbar/R0 = {width:.3e} is below two momentum cells ({:.3e})",
            2.0 * grid.dp()
        )));
    }
    JumpTable::new(&kernel, grid.np, grid.dp())
}

#[cfg(test)]
mod tests {
    use super::super::grid::observables;
    use super::*;
    use approx::assert_relative_eq;

    fn state(nx: usize, np: usize, pmax: f64, sp: f64) -> WignerGrid {
        WignerGrid::gaussian(nx, np, (-5.0, 5.0), (-pmax, pmax), (0.3, 0.2), (1.0, sp)).unwrap()
    }

    #[test]
    fn grw_lambda_zero_is_identity() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap();
        let mut g = state(8, 128, 8.0, 1.0);
        let before = g.values.clone();
        collapse_step_grw(&mut g, &p, 0.01).unwrap();
        assert_eq!(g.values, before);
    }

    #[test]
    fn full_collapse_event_adds_variance() {
        let p = CollapseParams::grw(1.0, 0.5, 1.0, 1.0, 1).unwrap();
        let mut g = state(4, 256, 10.0, 1.0);
        let v0 = observables(&g).var_p;
        convolve_grw_kernel(&mut g, &p).unwrap();
        let o = observables(&g);
        assert_relative_eq!(o.var_p, v0 + 0.5 / 2.0, max_relative = 1e-10);
        assert!((o.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grw_step_keeps_x_marginal() {
        let p = CollapseParams::grw(2.0, 0.5, 1.0, 1.0, 1).unwrap();
        let mut g = state(16, 256, 10.0, 1.0);
        let before = observables(&g).x_marginal;
        collapse_step_grw(&mut g, &p, 0.01).unwrap();
        let after = observables(&g).x_marginal;
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn grw_domain_too_small() {
        let p = CollapseParams::grw(1.0, 30.0, 1.0, 1.0, 1).unwrap();
        let mut g = state(2, 256, 4.0, 1.0);
        assert!(matches!(collapse_step_grw(&mut g, &p, 0.01), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn grw_unresolved_kernel() {
        let p = CollapseParams::grw(1.0, 1e-4, 1.0, 1.0, 1).unwrap();
        let mut g = state(2, 64, 8.0, 1.0);
        assert!(matches!(collapse_step_grw(&mut g, &p, 0.01), Err(Error::Resolution(_))));
    }

    #[test]
    fn grw_step_size_bound() {
        let p = CollapseParams::grw(20.0, 0.5, 1.0, 1.0, 1).unwrap();
        let mut g = state(2, 128, 8.0, 1.0);
        assert!(matches!(collapse_step_grw(&mut g, &p, 0.01), Err(Error::StepSize(_))));
    }

    #[test]
    fn fokker_planck_variance_law() {
        let p = CollapseParams::grw(1.0, 0.4, 1.0, 1.0, 1).unwrap();
        let d = kramers_moyal_coefficient(1, &p).unwrap();
        let mut g = state(4, 256, 10.0, 1.0);
        let v0 = observables(&g).kinetic_temperature;
        for _ in 0..200 {
            collapse_step_fokker_planck(&mut g, &p, 0.01).unwrap();
        }
        let o = observables(&g);
        assert_relative_eq!(o.kinetic_temperature - v0, 2.0 * d * 2.0, max_relative = 1e-9);
        assert!((o.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fokker_planck_stability_bound() {
        let p = CollapseParams::grw(100.0, 4.0, 1.0, 1.0, 1).unwrap();
        let mut g = state(2, 256, 10.0, 1.0);
        assert!(matches!(collapse_step_fokker_planck(&mut g, &p, 0.01), Err(Error::StepSize(_))));
    }

    #[test]
    fn kramers_zero_gamma_equals_fokker_planck() {
        let p = CollapseParams::dissipative(1.0, 0.4, 1.0, 1.0, 0.0, 1).unwrap();
        let mut a = state(4, 128, 8.0, 1.0);
        let mut b = a.clone();
        collapse_step_kramers(&mut a, &p, 0.01).unwrap();
        collapse_step_fokker_planck(&mut b, &p, 0.01).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn kramers_matches_caldeira_leggett_bitwise() {
        let p = CollapseParams::dissipative(2.0, 0.8, 1.0, 1.0, 0.1, 1).unwrap();
        let mut a = state(4, 128, 8.0, 1.0);
        let mut b = a.clone();
        for _ in 0..10 {
            collapse_step_kramers(&mut a, &p, 0.003).unwrap();
            caldeira_leggett_step(&mut b, p.gamma, p.mass, p.noise_temp, 0.003).unwrap();
        }
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn kramers_relaxes_monotonically() {
        // gamma = 0.4, m T_n = 1
        let p = CollapseParams::dissipative(2.0, 0.8, 1.0, 1.0, 0.1, 1).unwrap();
        assert_relative_eq!(p.mass * p.noise_temp, 1.0, max_relative = 1e-14);
        for sp in [0.5, 1.6] {
            let mut g = state(2, 128, 8.0, sp);
            let mut last = observables(&g).kinetic_temperature;
            for _ in 0..1000 {
                collapse_step_kramers(&mut g, &p, 0.003).unwrap();
                let t = observables(&g).kinetic_temperature;
                if sp < 1.0 {
                    assert!(t > last);
                } else {
                    assert!(t < last);
                }
                last = t;
            }
        }
    }

    #[test]
    fn dp_table_and_step() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap().with_gravity(1.0, 1.0).unwrap();
        let mut g = WignerGrid::gaussian(4, 512, (-5.0, 5.0), (-16.0, 16.0), (0.0, 0.0), (1.0, 1.5)).unwrap();
        let table = diosi_penrose_table(&g, &p, Smearing::Gaussian).unwrap();
        let p3 = p.with_dims(3).unwrap();
        let k = dp_jump_kernel(&p3, Smearing::Gaussian).unwrap();
        assert_relative_eq!(table.total_rate(), k.total_rate, max_relative = 1e-4);
        assert_relative_eq!(table.second_moment(), k.axis_second_moment(), max_relative = 5e-3);
        let n0 = g.norm();
        for _ in 0..5 {
            collapse_step_diosi_penrose(&mut g, &p, Smearing::Gaussian, 0.005).unwrap();
            let n = g.norm();
            assert!(((n - n0) / n0).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_zero_gravity_is_identity_and_resolution_checked() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap().with_gravity(0.0, 1.0).unwrap();
        let mut g = state(2, 128, 8.0, 1.0);
        let before = g.values.clone();
        collapse_step_diosi_penrose(&mut g, &p, Smearing::Gaussian, 0.01).unwrap();
        assert_eq!(g.values, before);
        let narrow = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap().with_gravity(1.0, 20.0).unwrap();
        assert!(matches!(
            collapse_step_diosi_penrose(&mut g, &narrow, Smearing::HardSphere, 0.001),
            Err(Error::Resolution(_))
        ));
        let strong = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap().with_gravity(1.0, 1.0).unwrap();
        assert!(matches!(
            collapse_step_diosi_penrose(&mut g, &strong, Smearing::Gaussian, 0.1),
            Err(Error::StepSize(_))
        ));
    }
}
