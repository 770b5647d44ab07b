use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is singular or nearly singular (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("root polishing failed: residual {residual:.3e} above tolerance {tolerance:.3e} at mu = {mu}")]
    Polish {
        mu: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("ambiguous branch selection at mu = {mu}: two roots equidistant from i*mu")]
    AmbiguousBranch { mu: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenNonConvergence { dim: usize },

    #[error("dense eigensolve rejected: block dimension {dim} exceeds cutoff {cutoff}")]
    TooLarge { dim: usize, cutoff: usize },

    #[error("fit window {what}: {reason}")]
    Fit { what: &'static str, reason: String },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Singular { .. } => "singular",
            Error::Residual { .. } => "residual",
            Error::Polish { .. } => "polish",
            Error::AmbiguousBranch { .. } => "ambiguous_branch",
            Error::EigenNonConvergence { .. } => "eigen_nonconvergence",
            Error::TooLarge { .. } => "too_large",
            Error::Fit { .. } => "fit",
            Error::Config { .. } => "config",
            Error::Report(_) => "report",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
