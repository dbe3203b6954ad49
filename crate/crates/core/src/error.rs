use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("basis scale mismatch: {0} vs {1}")]
    ScaleMismatch(f64, f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("zero test function")]
    ZeroFunction,

    #[error("trace overflows the scalar range (beta/L^2 = {0}); the value is finite but not representable")]
    DivergentScale(f64),

    #[error("test function is outside the regular domain of the limit state")]
    Divergent,

    #[error("{what} did not converge (last {last:e}, previous {previous:e})")]
    NotConverged {
        what: String,
        last: f64,
        previous: f64,
    },

    #[error("truncated Fock space of dimension {0} exceeds the cap {1}")]
    DimensionCap(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn not_converged(what: impl Into<String>, last: f64, previous: f64) -> Self {
        Error::NotConverged {
            what: what.into(),
            last,
            previous,
        }
    }
}
