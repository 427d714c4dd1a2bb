//! Hamiltonian part of the Wigner evolution: semi-Lagrangian transport in `x`
//! and `p`, plus the explicit `hbar^2` Moyal correction.

use super::generator::{GeneratorSpec, StreamingOrder};
use super::grid::WignerGrid;
use crate::{Error, Result};

/// Cubic Lagrange weights for the points `k-1, k, k+1, k+2` at fractional offset `t` from `k`.
fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn split_shift(s: f64) -> (isize, [f64; 4]) {
    let back = -s;
    let fl = back.floor();
    (fl as isize, lagrange_weights(back - fl))
}

/// `dst[i] = src(i - s)`, periodic.
fn shift_periodic(src: &[f64], dst: &mut [f64], s: f64) {
    let n = src.len() as isize;
    let (off, w) = split_shift(s);
    for (i, d) in dst.iter_mut().enumerate() {
        let k = i as isize + off;
        let mut acc = 0.0;
        for (m, wm) in w.iter().enumerate() {
            acc += wm * src[(k - 1 + m as isize).rem_euclid(n) as usize];
        }
        *d = acc;
    }
}

/// `dst[i] = src(i - s)` with zero values beyond the walls.
fn shift_open(src: &[f64], dst: &mut [f64], s: f64) {
    let n = src.len() as isize;
    let (off, w) = split_shift(s);
    for (i, d) in dst.iter_mut().enumerate() {
        let k = i as isize + off;
        let mut acc = 0.0;
        for (m, wm) in w.iter().enumerate() {
            let idx = k - 1 + m as isize;
            if (0..n).contains(&idx) {
                acc += wm * src[idx as usize];
            }
        }
        *d = acc;
    }
}

fn check_cfl(shift: f64, what: &str) -> Result<()> {
    if shift.abs() > 1.0 || !shift.is_finite() {
        return Err(Error::StepSize(format!("{what} moves {shift:.3} cells per step (limit 1)")));
    }
    Ok(())
}

/// `x -> x + p dt / m` for every momentum column.
pub(crate) fn advect_x(grid: &mut WignerGrid, mass: f64, dt: f64) -> Result<()> {
    let vmax = grid.p_min.abs().max(grid.p_max.abs()) / mass;
    check_cfl(vmax * dt / grid.dx(), "x-advection")?;
    let (nx, np) = (grid.nx, grid.np);
    let mut col = vec![0.0; nx];
    let mut out = vec![0.0; nx];
    for j in 0..np {
        let shift = grid.p(j) / mass * dt / grid.dx();
        for i in 0..nx {
            col[i] = grid.values[i * np + j];
        }
        shift_periodic(&col, &mut out, shift);
        for i in 0..nx {
            grid.values[i * np + j] = out[i];
        }
    }
    Ok(())
}

/// `p -> p - U'(x) dt` for every position row.
pub(crate) fn kick_p(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) -> Result<()> {
    let dp = grid.dp();
    let forces: Vec<f64> = (0..grid.nx).map(|i| -spec.potential.derivatives(grid.x(i))[1]).collect();
    for &f in &forces {
        check_cfl(f * dt / dp, "momentum kick")?;
    }
    let np = grid.np;
    let mut out = vec![0.0; np];
    for (i, f) in forces.into_iter().enumerate() {
        if f == 0.0 {
            continue;
        }
        let row = &mut grid.values[i * np..(i + 1) * np];
        shift_open(row, &mut out, f * dt / dp);
        row.copy_from_slice(&out);
    }
    Ok(())
}

/// Fourth-order centred third derivative with zero extension past the walls.
fn third_derivative(row: &[f64], dp: f64, out: &mut [f64]) {
    let n = row.len() as isize;
    let at = |k: isize| if (0..n).contains(&k) { row[k as usize] } else { 0.0 };
    let scale = 1.0 / (8.0 * dp * dp * dp);
    for (j, o) in out.iter_mut().enumerate() {
        let j = j as isize;
        *o = (-at(j + 3) + 8.0 * at(j + 2) - 13.0 * at(j + 1) + 13.0 * at(j - 1) - 8.0 * at(j - 2) + at(j - 3)) * scale;
    }
}

/// `dW/dt = -(hbar^2 / 24) U'''(x) d^3W/dp^3`, explicit midpoint rule.
pub(crate) fn moyal_correction(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) {
    let hbar = spec.params.hbar;
    let dp = grid.dp();
    let np = grid.np;
    let mut d3 = vec![0.0; np];
    let mut mid = vec![0.0; np];
    for i in 0..grid.nx {
        let u3 = spec.potential.derivatives(grid.x(i))[3];
        if u3 == 0.0 {
            continue;
        }
        let c = -hbar * hbar / 24.0 * u3;
        let row = &mut grid.values[i * np..(i + 1) * np];
        third_derivative(row, dp, &mut d3);
        for j in 0..np {
            mid[j] = row[j] + 0.5 * dt * c * d3[j];
        }
        third_derivative(&mid, dp, &mut d3);
        for j in 0..np {
            row[j] += dt * c * d3[j];
        }
    }
}

pub(crate) fn stream(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::StepSize(format!("dt must be positive, got {dt}")));
    }
    grid.check_finite()?;
    let m = spec.params.mass;
    // validate both CFL limits before touching the grid
    let vmax = grid.p_min.abs().max(grid.p_max.abs()) / m;
    check_cfl(vmax * dt / 2.0 / grid.dx(), "x-advection")?;
    for i in 0..grid.nx {
        check_cfl(spec.potential.derivatives(grid.x(i))[1] * dt / grid.dp(), "momentum kick")?;
    }
    advect_x(grid, m, dt / 2.0)?;
    kick_p(grid, spec, dt)?;
    if spec.streaming == StreamingOrder::Moyal3 {
        moyal_correction(grid, spec, dt);
    }
    advect_x(grid, m, dt / 2.0)?;
    Ok(())
}

/// Advances the Hamiltonian part by `dt` (Strang: half drift, kick, half drift).
pub fn streaming_step(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) -> Result<()> {
    stream(grid, spec, dt)?;
    grid.time += dt;
    Ok(())
}
