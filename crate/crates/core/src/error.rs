use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "covariance factorization failed at pivot {pivot} (residual {residual:e}); \
         coarsen the grid or reduce the number of nodes"
    )]
    Factorization { pivot: usize, residual: f64 },

    #[error(
        "penalty substep {substep} exceeds epsilon/4 = {limit}; \
         use substep_factor >= {required}"
    )]
    Stability {
        substep: f64,
        limit: f64,
        required: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "alpha = {alpha} is outside the admissible window ({lower:.4}, {upper:.4}) \
         estimated from the Hölder orders of the integrand and integrator"
    )]
    Inadmissible { alpha: f64, lower: f64, upper: f64 },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. } | Error::Stability { .. })
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
