use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", bullet(.0))]
    Validation(Vec<String>),

    #[error("solver failed: {0}")]
    NonConvergence(String),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn bullet(items: &[String]) -> String {
    items.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::NonConvergence(_) => exit::NON_CONVERGENCE,
            CliError::Io { .. } => exit::IO,
        }
    }
}

impl From<saser_core::Error> for CliError {
    fn from(e: saser_core::Error) -> Self {
        use saser_core::Error as E;
        match e {
            E::DegenerateSteadyState(_) | E::Integration { .. } | E::NonConvergence(_) | E::InvalidState(_) => {
                CliError::NonConvergence(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<saser_fitkit::FitError> for CliError {
    fn from(e: saser_fitkit::FitError) -> Self {
        use saser_fitkit::FitError as F;
        match e {
            F::Io { path, source } => CliError::Io { path, source },
            F::RankDeficient { .. } | F::OpenPeak(_) => CliError::NonConvergence(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
