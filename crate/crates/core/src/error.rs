use thiserror::Error;

/// Errors shared by every solver module.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A constructor or operation precondition was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point fell outside the domain of a profile or grid.
    #[error("point {point} outside domain [0, {r_max}]")]
    OutOfDomain { point: f64, r_max: f64 },

    /// An iterative solver exhausted its budget without converging.
    #[error("{solver} did not converge: {detail}")]
    NoConvergence { solver: &'static str, detail: String },

    /// Non-finite values where finite ones are required.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidParameter(msg.into())
    }

    pub fn no_convergence(solver: &'static str, detail: impl Into<String>) -> Self {
        CoreError::NoConvergence { solver, detail: detail.into() }
    }
}
