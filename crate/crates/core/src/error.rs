use thiserror::Error;

/// Errors produced by the solvers, the MD engine and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel is singular at p = 0")]
    SingularPoint,
    #[error("step size: {0}")]
    StepSize(String),
    #[error("momentum domain too small: {lost:.3e} of the norm would leave the grid")]
    DomainTooSmall { lost: f64 },
    #[error("kernel unresolved on grid: {0}")]
    Resolution(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("numerical blow-up at step {step}: {what}")]
    BlowUp { step: u64, what: String },
    #[error("initialization: {0}")]
    Initialization(String),
    #[error("statistics: {0}")]
    Statistics(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
