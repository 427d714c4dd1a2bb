use super::cells::{check_geometry, potential_energy, CellList};
use super::neighbors::{NeighborList, SKIN};
use super::rng::NoiseStreams;
use crate::{Error, Result};

/// Spacing of the value lattice on which positions, velocities and box
/// lengths live. Kicks and drifts are rounded to it, which makes every
/// addition exact and the integrator bit-reversible.
pub const LATTICE: f64 = 1.0 / (1u64 << 40) as f64;
/// Largest box side for which lattice arithmetic stays exact.
pub const MAX_BOX: f64 = 4096.0;

/// Nearest lattice value, ties to even (odd-symmetric: `quantize(-a) = -quantize(a)`).
#[inline]
pub fn quantize(a: f64) -> f64 {
    // adding and removing 1.5 * 2^52 rounds to an integer in the FPU's
    // nearest-even mode, avoiding a libm call on targets without SSE4.1
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let x = a * (1u64 << 40) as f64;
    let r = if x.abs() < 2_251_799_813_685_248.0 { (x + SHIFT) - SHIFT } else { x.round_ties_even() };
    r * LATTICE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsMode {
    Deterministic,
    GrwNoise,
    DissipativeGrw,
}

impl DynamicsMode {
    pub fn code(self) -> u32 {
        match self {
            Self::Deterministic => 0,
            Self::GrwNoise => 1,
            Self::DissipativeGrw => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Self::Deterministic),
            1 => Ok(Self::GrwNoise),
            2 => Ok(Self::DissipativeGrw),
            _ => Err(Error::Checkpoint(format!("unknown dynamics mode {code}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Deterministic => "deterministic",
            Self::GrwNoise => "grw_noise",
            Self::DissipativeGrw => "dissipative_grw",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self != Self::Deterministic
    }
}

impl std::str::FromStr for DynamicsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Self::Deterministic),
            "grw_noise" => Ok(Self::GrwNoise),
            "dissipative_grw" => Ok(Self::DissipativeGrw),
            _ => Err(Error::Config(format!("unknown dynamics mode '{s}'"))),
        }
    }
}

/// Equations of motion in reduced units (`m = 1`):
/// `dv = F dt - gamma v dt + A dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSpec {
    pub mode: DynamicsMode,
    pub noise_amplitude: f64,
    pub gamma: f64,
    pub noise_temp: f64,
    pub dt: f64,
    pub cutoff: f64,
}

impl DynamicsSpec {
    pub fn deterministic(dt: f64) -> Self {
        Self {
            mode: DynamicsMode::Deterministic,
            noise_amplitude: 0.0,
            gamma: 0.0,
            noise_temp: 0.0,
            dt,
            cutoff: super::potential::CUTOFF,
        }
    }

    /// Undamped white-noise kicks; the momentum diffusion constant is `A^2 / 2`.
    pub fn grw_noise(dt: f64, amplitude: f64) -> Self {
        Self {
            mode: DynamicsMode::GrwNoise,
            noise_amplitude: amplitude,
            ..Self::deterministic(dt)
        }
    }

    /// Damped noise with `gamma = A^2 / (2 T_n)`.
    pub fn dissipative(dt: f64, amplitude: f64, noise_temp: f64) -> Self {
        Self {
            mode: DynamicsMode::DissipativeGrw,
            noise_amplitude: amplitude,
            gamma: amplitude * amplitude / (2.0 * noise_temp),
            noise_temp,
            ..Self::deterministic(dt)
        }
    }

    pub fn with_mode(&self, mode: DynamicsMode) -> Self {
        match mode {
            DynamicsMode::Deterministic => Self::deterministic(self.dt),
            DynamicsMode::GrwNoise => Self::grw_noise(self.dt, self.noise_amplitude),
            DynamicsMode::DissipativeGrw => Self::dissipative(self.dt, self.noise_amplitude, self.noise_temp),
        }
        .with_cutoff(self.cutoff)
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Ideal gas: no pair forces (cutoff 0).
    pub fn force_free(self) -> Self {
        self.with_cutoff(0.0)
    }

    pub fn is_force_free(&self) -> bool {
        self.cutoff == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cutoff >= 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidParameter("cutoff must be finite and >= 0".into()));
        }
        let (a, g, t) = (self.noise_amplitude, self.gamma, self.noise_temp);
        if !(a >= 0.0 && g >= 0.0 && a.is_finite() && g.is_finite()) {
            return Err(Error::InvalidParameter("noise amplitude and gamma must be finite and >= 0".into()));
        }
        match self.mode {
            DynamicsMode::Deterministic if a != 0.0 || g != 0.0 => Err(Error::InvalidParameter(
                "deterministic dynamics needs zero noise and damping".into(),
            )),
            DynamicsMode::GrwNoise if g != 0.0 => {
                Err(Error::InvalidParameter("grw_noise dynamics has no damping".into()))
            }
            DynamicsMode::DissipativeGrw if !(t > 0.0) || (a * a - 2.0 * g * t).abs() > 1e-12 * a * a => {
                Err(Error::InvalidParameter("dissipative dynamics needs A^2 = 2 gamma T_n with T_n > 0".into()))
            }
            _ if self.gamma * self.dt > 0.1 => Err(Error::StepSize("gamma dt exceeds 0.1".into())),
            _ => Ok(()),
        }
    }
}

/// Particles of unit mass in a periodic rectangular box `[0, Lx) x [0, Ly)`.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub box_size: [f64; 2],
    pub time: f64,
    /// Completed steps; also the counter of the noise streams.
    pub step: u64,
    pub rng_key: u64,
    pub dynamics: DynamicsSpec,
    pub(crate) noise: Option<NoiseStreams>,
    pub(crate) forces: Option<Vec<[f64; 2]>>,
    pub(crate) neighbors: Option<NeighborList>,
}

impl PartialEq for ParticleSystem {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions
            && self.velocities == other.velocities
            && self.box_size == other.box_size
            && self.time == other.time
            && self.step == other.step
            && self.rng_key == other.rng_key
            && self.dynamics == other.dynamics
    }
}

impl ParticleSystem {
    /// Builds a system, snapping box, positions and velocities to the value
    /// lattice and wrapping positions into the box.
    pub fn new(
        positions: Vec<[f64; 2]>,
        velocities: Vec<[f64; 2]>,
        box_size: [f64; 2],
        dynamics: DynamicsSpec,
        rng_key: u64,
    ) -> Result<Self> {
        if positions.len() != velocities.len() || positions.is_empty() {
            return Err(Error::InvalidParameter("need equally many (>0) positions and velocities".into()));
        }
        dynamics.validate()?;
        let box_size = [quantize(box_size[0]), quantize(box_size[1])];
        if box_size.iter().any(|&l| l > MAX_BOX) {
            return Err(Error::Geometry(format!("box side above {MAX_BOX} breaks exact lattice arithmetic")));
        }
        check_geometry(box_size, dynamics.cutoff)?;
        if positions.iter().chain(&velocities).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("positions and velocities must be finite".into()));
        }
        let positions = positions
            .into_iter()
            .map(|p| [wrap_slow(quantize(p[0]), box_size[0]), wrap_slow(quantize(p[1]), box_size[1])])
            .collect();
        let velocities = velocities.into_iter().map(|v| [quantize(v[0]), quantize(v[1])]).collect();
        Ok(Self {
            positions,
            velocities,
            box_size,
            time: 0.0,
            step: 0,
            rng_key,
            dynamics,
            noise: None,
            forces: None,
            neighbors: None,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn density(&self) -> f64 {
        self.n() as f64 / (self.box_size[0] * self.box_size[1])
    }

    /// Replaces the dynamics; the state, step counter and key are untouched.
    pub fn set_dynamics(&mut self, dynamics: DynamicsSpec) -> Result<()> {
        dynamics.validate()?;
        if dynamics.cutoff != self.dynamics.cutoff {
            self.forces = None;
        }
        check_geometry(self.box_size, dynamics.cutoff)?;
        self.dynamics = dynamics;
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()
    }

    /// `(potential energy, smallest pair distance)`.
    pub fn potential_energy(&self) -> Result<(f64, f64)> {
        if self.dynamics.is_force_free() {
            return Ok((0.0, f64::INFINITY));
        }
        potential_energy(&self.positions, self.box_size, self.dynamics.cutoff)
    }

    pub fn total_momentum(&self) -> [f64; 2] {
        self.velocities
            .iter()
            .fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]])
    }

    pub fn cell_list(&self) -> Result<CellList> {
        CellList::build(&self.positions, self.box_size, self.dynamics.cutoff)
    }

    pub(crate) fn noise_streams(&mut self) -> &mut NoiseStreams {
        let (key, n) = (self.rng_key, self.n());
        self.noise.get_or_insert_with(|| NoiseStreams::new(key, n))
    }

    pub(crate) fn cached_forces(&mut self) -> Result<&[[f64; 2]]> {
        if self.forces.is_none() {
            let pos = std::mem::take(&mut self.positions);
            let f = self.forces_at(&pos, None);
            self.positions = pos;
            self.forces = Some(f?);
        }
        Ok(self.forces.as_deref().unwrap_or(&[]))
    }

    /// Forces at `positions` (same box and cutoff), refreshing the neighbour
    /// list when it no longer covers them.
    pub(crate) fn forces_at(&mut self, positions: &[[f64; 2]], cap: Option<f64>) -> Result<Vec<[f64; 2]>> {
        let (box_size, cutoff) = (self.box_size, self.dynamics.cutoff);
        if cutoff == 0.0 {
            return Ok(vec![[0.0; 2]; positions.len()]);
        }
        let valid = self.neighbors.as_ref().is_some_and(|nl| nl.is_valid_for(positions, box_size, cutoff));
        if !valid {
            self.neighbors = Some(NeighborList::build(positions, box_size, cutoff, SKIN)?);
        }
        Ok(self.neighbors.as_ref().map(|nl| nl.forces(positions, cap)).unwrap_or_default())
    }
}

fn wrap_slow(x: f64, l: f64) -> f64 {
    let w = x.rem_euclid(l);
    if w >= l {
        0.0
    } else {
        w
    }
}

/// Pair forces for the current positions: each particle sums its partners
/// within the cutoff in ascending index order.
pub fn compute_forces(sys: &ParticleSystem) -> Result<Vec<[f64; 2]>> {
    if sys.dynamics.is_force_free() {
        return Ok(vec![[0.0; 2]; sys.n()]);
    }
    let nl = NeighborList::build(&sys.positions, sys.box_size, sys.dynamics.cutoff, 0.0)?;
    Ok(nl.forces(&sys.positions, None))
}
