use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown level label {0:?} (expected g, e or f)")]
    UnknownLevel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no population inversion: gamma_fe = {gamma_fe} MHz <= gamma_eg = {gamma_eg} MHz")]
    NoInversion { gamma_fe: f64, gamma_eg: f64 },

    #[error("e-f coupling enabled with zero detuning (delta_anharm = 0)")]
    DegenerateDetuning,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("steady state is not unique or is ill-conditioned: {0}")]
    DegenerateSteadyState(String),

    #[error("integration failed at t = {t} us (step {h:e} us after {steps} steps): {reason}")]
    Integration { t: f64, h: f64, steps: usize, reason: String },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
