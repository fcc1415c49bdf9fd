use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    /// The interior Dirichlet system is (numerically) singular.
    #[error(
        "0 is not an eigenvalue of the Dirichlet problem for -Δ+q is violated: \
         relative smallest singular value {margin:e} is below threshold {threshold:e}"
    )]
    EigenvalueGuard { margin: f64, threshold: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported dimension n = {0}")]
    UnsupportedDimension(usize),

    #[error("cell {target} is unreachable from the first cell; the partition has no chain to it")]
    Unreachable { target: usize },

    #[error("reconstruction diverged after {iterations} iterations (misfit {misfit:e})")]
    Divergence { iterations: usize, misfit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
