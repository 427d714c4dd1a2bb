//! Phase-space simulation toolkit for spontaneous-collapse models.
//!
//! * [`kernels`]: collapse-model kernels and coefficients (GRW, CSL mapping,
//!   Diósi-Penrose, dissipative GRW), free of any discretization.
//! * [`wigner`]: a 1D Wigner-function grid solver for the collapse master
//!   equations and their Fokker-Planck/Kramers reductions.
//! * [`md`]: a 2D Langevin molecular-dynamics engine with a smoothed
//!   Lennard-Jones potential and exactly reversible leapfrog integration.
//! * [`analysis`]: kinetic-energy fields, profiles, Fourier modes and the
//!   molecular-chaos factorization diagnostic.
//! * [`checkpoint`]: the binary snapshot format.
//! * [`runner`]: configuration, the time-reversal protocol, the Wigner
//!   verification suite and unit conversion.

pub mod analysis;
pub mod checkpoint;
pub mod error;
pub mod kernels;
pub mod md;
mod quad;
pub mod runner;
pub mod wigner;

pub use error::{Error, Result};
