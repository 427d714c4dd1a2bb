//! Initial states, equilibration and the joining of two equilibrated halves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::cells::CellList;
use super::integrate::{leapfrog_step, step_with_cap};
use super::system::{quantize, DynamicsSpec, ParticleSystem, LATTICE};
use crate::analysis::kinetic_temperature;
use crate::{Error, Result};

/// Closest pair distance allowed across the seam after joining.
pub const SEAM_OVERLAP: f64 = 0.8;
/// Per-particle force cap during seam relaxation.
pub const SEAM_FORCE_CAP: f64 = 1e4;
pub const SEAM_RELAX_STEPS: u64 = 100;
/// Width of the strips in which seam relaxation holds each half's temperature.
pub const SEAM_STRIP_WIDTH: f64 = 2.0;
/// Uniform jitter of the initial lattice, in lattice spacings. Reproduces the
/// reference equilibrium temperatures 0.5335 and 0.6391 for velocity spreads
/// 0.75 and 0.85 at density 0.7.
pub const LATTICE_JITTER: f64 = 0.16;

/// Stream ids of the initialization generators, far from particle ids.
const STREAM_POSITIONS: u64 = u64::MAX;
const STREAM_VELOCITIES: u64 = u64::MAX - 1;

fn init_rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(key);
    r.set_stream(stream);
    r
}

/// Positions on a jittered rectangular lattice filling `box_size`.
///
/// Random insertion is hopeless at liquid densities, so this is the only
/// strategy; a lattice spacing below the overlap distance is an error.
pub fn lattice_positions(n: usize, box_size: [f64; 2], jitter: f64, key: u64) -> Result<Vec<[f64; 2]>> {
    if n == 0 {
        return Err(Error::Initialization("no particles requested".into()));
    }
    let aspect = box_size[0] / box_size[1];
    let mut nx = ((n as f64 * aspect).sqrt().round() as usize).max(1);
    let mut ny = n.div_ceil(nx);
    while nx * ny < n {
        nx += 1;
        ny = n.div_ceil(nx);
    }
    let (ax, ay) = (box_size[0] / nx as f64, box_size[1] / ny as f64);
    if ax.min(ay) < SEAM_OVERLAP {
        return Err(Error::Initialization(format!(
            "density too high: lattice spacing {:.3} below {SEAM_OVERLAP}",
            ax.min(ay)
        )));
    }
    let mut rng = init_rng(key, STREAM_POSITIONS);
    let u = Uniform::new(-0.5, 0.5).map_err(|e| Error::Initialization(e.to_string()))?;
    Ok((0..n)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            [
                (i as f64 + 0.5 + jitter * u.sample(&mut rng)) * ax,
                (j as f64 + 0.5 + jitter * u.sample(&mut rng)) * ay,
            ]
        })
        .collect())
}

/// Independent Gaussian velocity components of standard deviation `sigma`,
/// snapped to the lattice with the total momentum removed exactly.
pub fn gaussian_velocities(n: usize, sigma: f64, key: u64) -> Result<Vec<[f64; 2]>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Initialization(e.to_string()))?;
    let mut rng = init_rng(key, STREAM_VELOCITIES);
    let mut ticks: Vec<[i64; 2]> = (0..n)
        .map(|_| {
            [
                (normal.sample(&mut rng) / LATTICE).round() as i64,
                (normal.sample(&mut rng) / LATTICE).round() as i64,
            ]
        })
        .collect();
    for c in 0..2 {
        let total: i64 = ticks.iter().map(|t| t[c]).sum();
        let (q, r) = (total.div_euclid(n as i64), total.rem_euclid(n as i64));
        for (k, t) in ticks.iter_mut().enumerate() {
            t[c] -= q + i64::from((k as i64) < r);
        }
    }
    Ok(ticks
        .into_iter()
        .map(|t| [t[0] as f64 * LATTICE, t[1] as f64 * LATTICE])
        .collect())
}

/// A fresh lattice system with Gaussian velocities.
pub fn initial_system(
    n: usize,
    box_size: [f64; 2],
    sigma: f64,
    dynamics: DynamicsSpec,
    key: u64,
) -> Result<ParticleSystem> {
    let box_size = [quantize(box_size[0]), quantize(box_size[1])];
    let pos = lattice_positions(n, box_size, LATTICE_JITTER, key)?;
    let vel = gaussian_velocities(n, sigma, key)?;
    ParticleSystem::new(pos, vel, box_size, dynamics, key)
}

/// Stopping rule for equilibration: stop once two consecutive window means
/// of the kinetic temperature differ by less than `tolerance` (relative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriterion {
    pub window_steps: u64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrated {
    pub system: ParticleSystem,
    /// Mean kinetic temperature over the final window (or the final state
    /// when fewer than 20 steps ran).
    pub temperature: f64,
    pub steps: u64,
}

/// Redraws Gaussian velocities of standard deviation `target_sigma`, removes
/// the net momentum and runs `steps` deterministic steps.
pub fn equilibrate(sys: ParticleSystem, target_sigma: f64, steps: u64) -> Result<Equilibrated> {
    equilibrate_until(sys, target_sigma, steps, None)
}

pub fn equilibrate_until(
    mut sys: ParticleSystem,
    target_sigma: f64,
    max_steps: u64,
    stop: Option<StopCriterion>,
) -> Result<Equilibrated> {
    if !(target_sigma > 0.0 && target_sigma.is_finite()) {
        return Err(Error::InvalidParameter("target_sigma must be positive".into()));
    }
    sys.velocities = gaussian_velocities(sys.n(), target_sigma, sys.rng_key)?;
    sys.set_dynamics(DynamicsSpec::deterministic(sys.dynamics.dt).with_cutoff(sys.dynamics.cutoff))?;
    let window = stop.map(|s| s.window_steps).unwrap_or((max_steps / 2).max(1)).max(1);
    let mut sum = 0.0;
    let mut samples = 0u64;
    let mut previous: Option<f64> = None;
    let mut last_mean = kinetic_temperature(&sys);
    let mut done = 0;
    while done < max_steps {
        leapfrog_step(&mut sys)?;
        done += 1;
        if done % 10 == 0 {
            sum += kinetic_temperature(&sys);
            samples += 1;
        }
        if done % window == 0 && samples > 0 {
            last_mean = sum / samples as f64;
            if let (Some(crit), Some(prev)) = (stop, previous) {
                if ((last_mean - prev) / prev).abs() < crit.tolerance {
                    break;
                }
            }
            previous = Some(last_mean);
            sum = 0.0;
            samples = 0;
        }
    }
    let temperature = if done < 20 {
        kinetic_temperature(&sys)
    } else if samples > 0 && previous.is_none() {
        sum / samples as f64
    } else {
        last_mean
    };
    Ok(Equilibrated {
        system: sys,
        temperature,
        steps: done,
    })
}

/// Places `right` next to `left` along `x` in one periodic box of the summed
/// width, then separates cross-seam pairs closer than [`SEAM_OVERLAP`].
/// Time and step counter restart at zero; dynamics and key come from `left`.
pub fn join_systems(left: &ParticleSystem, right: &ParticleSystem) -> Result<ParticleSystem> {
    if left.box_size[1] != right.box_size[1] {
        return Err(Error::Geometry("box heights differ".into()));
    }
    if ((left.density() - right.density()) / left.density()).abs() > 1e-9 {
        return Err(Error::Geometry("densities differ".into()));
    }
    let lx = left.box_size[0];
    let mut pos = left.positions.clone();
    pos.extend(right.positions.iter().map(|p| [p[0] + lx, p[1]]));
    let mut vel = left.velocities.clone();
    vel.extend_from_slice(&right.velocities);
    let box_size = [lx + right.box_size[0], left.box_size[1]];
    let mut sys = ParticleSystem::new(pos, vel, box_size, left.dynamics, left.rng_key)?;
    resolve_seam_overlaps(&mut sys, left.n())?;
    Ok(sys)
}

/// Pushes apart every pair with one member from each half (`index < n_left`
/// versus the rest) that is closer than [`SEAM_OVERLAP`], symmetrically along
/// the pair axis, until no such pair remains.
pub fn resolve_seam_overlaps(sys: &mut ParticleSystem, n_left: usize) -> Result<usize> {
    let mut moved = 0;
    for _sweep in 0..100 {
        let cells = CellList::build(&sys.positions, sys.box_size, sys.dynamics.cutoff)?;
        let l = sys.box_size;
        let mut pairs = Vec::new();
        for i in 0..n_left {
            for j in candidates(&cells, i, sys.n()) {
                if j < n_left {
                    continue;
                }
                let mut d = [sys.positions[j][0] - sys.positions[i][0], sys.positions[j][1] - sys.positions[i][1]];
                d[0] -= l[0] * (d[0] / l[0]).round();
                d[1] -= l[1] * (d[1] / l[1]).round();
                let r = d[0].hypot(d[1]);
                if r < SEAM_OVERLAP {
                    pairs.push((i, j, d, r));
                }
            }
        }
        if pairs.is_empty() {
            return Ok(moved);
        }
        for (i, j, d, r) in pairs {
            let (ux, uy) = if r > 0.0 { (d[0] / r, d[1] / r) } else { (1.0, 0.0) };
            // a little beyond the threshold so that rounding cannot leave the pair short
            let s = 0.5 * (SEAM_OVERLAP - r) + 1e-6;
            let (pi, pj) = (sys.positions[i], sys.positions[j]);
            sys.positions[i] = [wrap_pos(pi[0] - s * ux, l[0]), wrap_pos(pi[1] - s * uy, l[1])];
            sys.positions[j] = [wrap_pos(pj[0] + s * ux, l[0]), wrap_pos(pj[1] + s * uy, l[1])];
            moved += 1;
        }
        sys.forces = None;
        sys.neighbors = None;
    }
    Err(Error::Initialization("seam overlaps persist after 100 sweeps".into()))
}

fn wrap_pos(x: f64, l: f64) -> f64 {
    let w = quantize(x).rem_euclid(l);
    if w >= l {
        0.0
    } else {
        w
    }
}

fn candidates(cells: &CellList, i: usize, n: usize) -> Vec<usize> {
    if !cells.uses_cells() {
        return (0..n).filter(|&j| j != i).collect();
    }
    let c = cells.cell_of[i];
    let (cx, cy) = ((c % cells.ncx) as isize, (c / cells.ncx) as isize);
    let mut out = Vec::new();
    for dy in -1..=1 {
        for dx in -1..=1 {
            let xx = (cx + dx).rem_euclid(cells.ncx as isize);
            let yy = (cy + dy).rem_euclid(cells.ncy as isize);
            out.extend(cells.cell((yy * cells.ncx as isize + xx) as usize).iter().filter(|&&j| j != i));
        }
    }
    out
}

/// Deterministic steps with each particle's force capped, then time and step
/// counter reset to zero.
///
/// Energy released by the seam overlaps is removed as it appears: after every
/// step the velocities of each half within each strip of width
/// [`SEAM_STRIP_WIDTH`] along `x` are rescaled to that half's
/// temperature on entry. Particles `0..n_left` form the left half.
pub fn relax_seam(sys: &mut ParticleSystem, n_left: usize, steps: u64, cap: f64) -> Result<()> {
    if n_left == 0 || n_left >= sys.n() {
        return Err(Error::InvalidParameter(format!("n_left must split {} particles", sys.n())));
    }
    let dynamics = sys.dynamics;
    let temperature = |vs: &[[f64; 2]]| vs.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / (2 * vs.len()) as f64;
    let targets = [temperature(&sys.velocities[..n_left]), temperature(&sys.velocities[n_left..])];
    let strips = ((sys.box_size[0] / SEAM_STRIP_WIDTH).floor() as usize).max(1);
    sys.set_dynamics(DynamicsSpec::deterministic(dynamics.dt).with_cutoff(dynamics.cutoff))?;
    for _ in 0..steps {
        step_with_cap(sys, Some(cap))?;
        hold_strip_temperatures(sys, n_left, strips, targets);
    }
    sys.set_dynamics(dynamics)?;
    sys.forces = None;
    sys.neighbors = None;
    sys.noise = None;
    sys.time = 0.0;
    sys.step = 0;
    Ok(())
}

fn hold_strip_temperatures(sys: &mut ParticleSystem, n_left: usize, strips: usize, targets: [f64; 2]) {
    let lx = sys.box_size[0];
    let group = |i: usize, x: f64| {
        let s = ((x / lx * strips as f64) as usize).min(strips - 1);
        2 * s + usize::from(i >= n_left)
    };
    // count and squared velocity sum per (strip, half)
    let mut acc = vec![(0usize, 0.0f64); 2 * strips];
    for (i, (p, v)) in sys.positions.iter().zip(&sys.velocities).enumerate() {
        let a = &mut acc[group(i, p[0])];
        a.0 += 1;
        a.1 += v[0] * v[0] + v[1] * v[1];
    }
    let scale: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(g, &(n, sq))| if n < 2 || sq == 0.0 { 1.0 } else { (targets[g % 2] * (2 * n) as f64 / sq).sqrt() })
        .collect();
    for i in 0..sys.n() {
        let f = scale[group(i, sys.positions[i][0])];
        let v = &mut sys.velocities[i];
        *v = [quantize(f * v[0]), quantize(f * v[1])];
    }
}
