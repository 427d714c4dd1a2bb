//! Kick-drift-kick leapfrog on the value lattice, with Euler-Maruyama noise
//! and damping applied after the second half kick.

use rayon::prelude::*;

use super::rng;
use super::system::{quantize, DynamicsMode, ParticleSystem};
use crate::{Error, Result};

#[inline]
fn wrap(x: f64, l: f64) -> f64 {
    if x < 0.0 {
        x + l
    } else if x >= l {
        x - l
    } else {
        x
    }
}

/// One full step of the system's dynamics.
pub fn leapfrog_step(sys: &mut ParticleSystem) -> Result<()> {
    step_with_cap(sys, None)
}

/// `steps` consecutive steps; stops at the first error.
pub fn run(sys: &mut ParticleSystem, steps: u64) -> Result<()> {
    for _ in 0..steps {
        leapfrog_step(sys)?;
    }
    Ok(())
}

pub(crate) fn step_with_cap(sys: &mut ParticleSystem, cap: Option<f64>) -> Result<()> {
    let spec = sys.dynamics;
    let dt = spec.dt;
    let half = 0.5 * dt;
    let step = sys.step;
    let forces = if cap.is_some() {
        let pos = sys.positions.clone();
        sys.forces_at(&pos, cap)?
    } else {
        sys.cached_forces()?.to_vec()
    };
    let mut vel = sys.velocities.clone();
    let mut pos = sys.positions.clone();
    let box_size = sys.box_size;
    vel.par_iter_mut()
        .zip(pos.par_iter_mut())
        .zip(forces.par_iter())
        .for_each(|((v, x), f)| {
            v[0] += quantize(f[0] * half);
            v[1] += quantize(f[1] * half);
            x[0] = wrap(x[0] + quantize(v[0] * dt), box_size[0]);
            x[1] = wrap(x[1] + quantize(v[1] * dt), box_size[1]);
        });
    let new_forces = sys.forces_at(&pos, cap)?;
    if let Some(i) = new_forces.iter().position(|f| !(f[0].is_finite() && f[1].is_finite())) {
        return Err(Error::BlowUp {
            step,
            what: format!("non-finite force on particle {i}"),
        });
    }
    vel.par_iter_mut().zip(new_forces.par_iter()).for_each(|(v, f)| {
        v[0] += quantize(f[0] * half);
        v[1] += quantize(f[1] * half);
    });
    if spec.mode != DynamicsMode::Deterministic {
        let amp = spec.noise_amplitude * dt.sqrt();
        let damp = if spec.mode == DynamicsMode::DissipativeGrw { spec.gamma * dt } else { 0.0 };
        let (streams, next) = sys.noise_streams().slices_mut();
        vel.par_iter_mut()
            .zip(streams.par_iter_mut())
            .zip(next.par_iter_mut())
            .for_each(|((v, r), nx)| {
                let xi = rng::draw(r, nx, step);
                v[0] += quantize(amp * xi[0] - damp * v[0]);
                v[1] += quantize(amp * xi[1] - damp * v[1]);
            });
    }
    if let Some(i) = vel.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(Error::BlowUp {
            step,
            what: format!("non-finite velocity on particle {i}"),
        });
    }
    sys.positions = pos;
    sys.velocities = vel;
    sys.forces = if cap.is_some() { None } else { Some(new_forces) };
    sys.step += 1;
    sys.time += dt;
    Ok(())
}

/// Negates all velocities; positions, time, step counter and noise streams
/// are unchanged.
pub fn reverse_momenta(sys: &mut ParticleSystem) {
    for v in sys.velocities.iter_mut() {
        v[0] = -v[0];
        v[1] = -v[1];
    }
}
