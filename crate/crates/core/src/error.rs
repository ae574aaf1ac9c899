use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix (best pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("regularity failure at q = {q:?}: E^T G E is singular")]
    Regularity { q: Vec<f64> },

    #[error("multiplier matrix M G^-1 M^T is singular at q = {q:?}")]
    Compatibility { q: Vec<f64> },

    #[error("degenerate distribution at q = {q:?}: {detail}")]
    DegenerateDistribution { q: Vec<f64>, detail: String },

    #[error("annihilator inconsistent with frame at q = {q:?}: max |M E| = {residual:.3e}")]
    Inconsistent { q: Vec<f64>, residual: f64 },

    #[error("initial data violates constraint row {row}: residual {residual:.3e}")]
    Precondition { row: usize, residual: f64 },

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64, last: Vec<f64> },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("unknown vector field '{0}'")]
    UnknownField(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Regularity { .. }
                | Error::Compatibility { .. }
                | Error::DegenerateDistribution { .. }
                | Error::Divergence { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
