//! Configuration, the time-reversal protocol, the Wigner verification suite
//! and unit conversion.

pub mod config;
pub mod protocol;
pub mod suite;
pub mod units;

pub use config::RunConfig;
pub use protocol::{evaluate, run_protocol, run_stage, Manifest, ProtocolReport, Stage};
pub use suite::{default_suite_params, run_wigner_suite, Check, CheckRow};
pub use units::{convert_units, Species, UnitReport};
