use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unknown model '{0}' (expected notch_ge, notch_gf, lorentzian or voigt)")]
    UnknownModel(String),
    /// The free parameters are not all identifiable from the data.
    #[error("rank-deficient Jacobian (condition {condition:.2e}); weakly determined: {params:?}")]
    RankDeficient { condition: f64, params: Vec<String> },
    #[error("peak has no half-maximum crossing on the {0} side")]
    OpenPeak(&'static str),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, FitError>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> FitError {
    FitError::InvalidParameter { name: name.into(), reason: reason.into() }
}
