use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Clone, Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside region: {0}")]
    OutOfRegion(String),

    #[error("resource limit: {what} needs {required} bytes, budget is {budget}")]
    ResourceLimit {
        what: String,
        required: u128,
        budget: u128,
    },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("singular system: component containing vertex {vertex} has no absorbing contact")]
    SingularSystem { vertex: usize },

    #[error(
        "quadrature did not reach the requested accuracy (estimated relative error {achieved:e})"
    )]
    Quadrature { achieved: f64 },

    #[error("covariance factorization failed (smallest eigenvalue {smallest_eigenvalue:e})")]
    Factorization { smallest_eigenvalue: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}
