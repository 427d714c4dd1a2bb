//! Two-dimensional Langevin molecular dynamics in reduced Lennard-Jones units.

pub mod cells;
pub mod init;
pub mod integrate;
pub mod neighbors;
pub mod potential;
pub mod rng;
pub mod system;

pub use cells::{all_pairs_forces, CellList};
pub use init::{equilibrate, equilibrate_until, initial_system, join_systems, relax_seam, Equilibrated, StopCriterion};
pub use neighbors::NeighborList;
pub use integrate::{leapfrog_step, reverse_momenta, run};
pub use potential::smoothed_lj_pair;
pub use system::{compute_forces, quantize, DynamicsMode, DynamicsSpec, ParticleSystem, LATTICE};
