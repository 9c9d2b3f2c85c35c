use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the discretization, reduction and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty system: the mesh has no free degrees of freedom")]
    EmptySystem,

    #[error("s = {s} lies outside the region of convergence Re(s) > {abscissa}")]
    OutsideAbscissa { s: Complex64, abscissa: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("numerical failure{}: {message} (residual {residual:.3e})", .shift.map(|s| format!(" at s = {s}")).unwrap_or_default())]
    Numerical {
        message: String,
        residual: f64,
        shift: Option<Complex64>,
    },

    #[error("relative error undefined: reference trajectory has zero norm")]
    UndefinedRatio,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
            shift: None,
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// True for errors the CLI reports with the config-error exit code.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Json(_) | Error::InvalidArgument(_) | Error::InvalidData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
