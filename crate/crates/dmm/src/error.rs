use thiserror::Error;

/// Errors surfaced by the estimation pipelines and their building blocks.
#[derive(Debug, Error)]
pub enum DmmError {
    #[error("invalid discrete distribution: {0}")]
    InvalidDistribution(String),

    #[error("density undefined for a degenerate mixture (sigma2 = 0)")]
    DegenerateDensity,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("moment index out of range: {0}")]
    MomentIndex(String),

    #[error("moment vector is not in the moment space (violation {violation:.3e})")]
    InvalidMoments { violation: f64 },

    #[error("projection did not converge within {iterations} iterations (residual {residual:.3e})")]
    ProjectionNonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate found, as raw moment values.
        best: Vec<f64>,
    },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("no sign change of the Lindsay determinant on (0, {upper}]; try a finer scan grid")]
    NoRootBracket { upper: f64 },

    #[error("moment equations unsolvable for this dataset: {0}")]
    MomentEquationsUnsolvable(String),

    #[error("component count mismatch across projection directions: {0}")]
    DirectionMismatch(String),

    #[error("degenerate linear system: {0}")]
    DegenerateSystem(String),

    #[error("empty point set")]
    EmptySet,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

pub type Result<T> = std::result::Result<T, DmmError>;
