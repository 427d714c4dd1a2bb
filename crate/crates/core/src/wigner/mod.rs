//! One-dimensional Wigner-function solver.
//!
//! Uniform tensor grid, periodic in `x` and zero-flux in `p`; Strang
//! splitting between the Hamiltonian streaming and the collapse generators.

pub mod collapse;
pub mod generator;
pub mod grid;
pub mod streaming;

pub use collapse::{
    caldeira_leggett_step, collapse_step_diosi_penrose, collapse_step_fokker_planck, collapse_step_grw,
    collapse_step_kramers, convolve_grw_kernel, diosi_penrose_table, JumpTable,
};
pub use generator::{GeneratorMode, GeneratorSpec, PolynomialPotential, Potential, StreamingOrder};
pub use grid::{observables, Observables, WignerGrid};
pub use streaming::streaming_step;

use crate::Result;

/// Applies the non-Hamiltonian part of `spec.mode` for a time `dt`.
pub fn collapse_part(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) -> Result<()> {
    match spec.mode {
        GeneratorMode::LiouvilleClassical | GeneratorMode::MoyalOrder3 => Ok(()),
        GeneratorMode::GrwMaster => collapse::grw_collapse(grid, &spec.params, dt),
        GeneratorMode::GrwFokkerPlanck => collapse::fokker_planck(grid, &spec.params, dt),
        GeneratorMode::DissipativeKramers => collapse::kramers(grid, &spec.params, dt),
        GeneratorMode::DiosiPenroseMaster(s) => collapse::diosi_penrose(grid, &spec.params, s, dt),
    }
}

/// Second-order step: streaming `dt/2`, collapse `dt`, streaming `dt/2`.
///
/// The grid is left untouched if any sub-step reports an error.
pub fn strang_step(grid: &mut WignerGrid, spec: &GeneratorSpec, dt: f64) -> Result<()> {
    let mut work = grid.clone();
    streaming::stream(&mut work, spec, dt / 2.0)?;
    collapse_part(&mut work, spec, dt)?;
    streaming::stream(&mut work, spec, dt / 2.0)?;
    work.check_finite()?;
    work.time = grid.time + dt;
    *grid = work;
    Ok(())
}
