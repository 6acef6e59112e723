use thiserror::Error;

/// Errors raised anywhere in the estimation stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e})")]
    NonSkewInput { asymmetry: f64 },

    #[error("rotation angle {angle:.9} rad is too close to pi for the logarithm")]
    NearPiSingularity { angle: f64 },

    #[error("matrix is not a rotation (orthonormality error {error:.3e})")]
    NotARotation { error: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("direction matrix is rank deficient (sigma_min / sigma_max = {ratio:.3e})")]
    RankDeficientDirections { ratio: f64 },

    #[error("requested eigenvalues are not distinct and positive: {0:?}")]
    DegenerateEigenvalues([f64; 3]),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("position {distance:.3e} is inside the gravity singularity radius")]
    OriginSingularity { distance: f64 },

    #[error("covariance blew up: {0}")]
    CovarianceBlowup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timestamps are not monotone at line {line}")]
    NonMonotoneTimestamps { line: usize },
}

impl From<std::io::Error> for GeoError {
    fn from(e: std::io::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
