use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma pole at x = {x}")]
    Pole { x: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty time series")]
    EmptySeries,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate recurrence denominator ({0})")]
    DegenerateDenominator(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unreachable design targets: {0}")]
    Unreachable(String),
    #[error("degenerate fit target: {0}")]
    DegenerateTarget(String),
    #[error("solver diverged at t = {t} (step {step})")]
    Diverged { step: usize, t: f64 },
}
