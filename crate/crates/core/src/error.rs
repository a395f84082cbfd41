use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },

    #[error("{name} = {value} is outside the valid range [{min}, {max}]")]
    DimensionOutOfRange {
        name: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("model does not support {0}")]
    UnsupportedCapability(&'static str),

    #[error("point outside the model support: {0}")]
    Domain(String),

    #[error("sampling failed at sample {index}: {source}")]
    SamplingFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("covariance is numerically singular (condition number {condition:e} exceeds {limit:e})")]
    SingularCovariance { condition: f64, limit: f64 },

    #[error("need at least {required} samples, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("chain of length {found} is too short; at least {required} states are needed")]
    ChainTooShort { required: usize, found: usize },

    #[error("{name} must be nonnegative, got {value}")]
    NegativeInput { name: &'static str, value: f64 },

    #[error("all inner log-likelihoods at outer sample {index} are below the underflow threshold")]
    Underflow { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed matrix file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl Into<String>,
    found: impl Into<String>,
) -> Error {
    Error::ShapeMismatch {
        context,
        expected: expected.into(),
        found: found.into(),
    }
}

pub(crate) fn check_dim(name: &'static str, value: usize, max: usize) -> Result<()> {
    if value > max {
        return Err(Error::DimensionOutOfRange {
            name,
            value,
            min: 0,
            max,
        });
    }
    Ok(())
}
