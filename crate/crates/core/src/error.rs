use num_complex::Complex64;
use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid operator spec: {0}")]
    InvalidSpec(String),

    /// A pivot of magnitude below the singularity threshold was met during LU.
    #[error("matrix is numerically singular at pivot {index}")]
    Singular { index: usize },

    /// The shift handed to a shift-invert solver is numerically an eigenvalue.
    #[error("shift {shift} is numerically an eigenvalue")]
    ShiftIsEigenvalue { shift: Complex64 },

    #[error("no convergence in {what} after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        best: Complex64,
        residual: f64,
    },

    #[error("dimension {n} exceeds the dense cap {cap}; use locate_eigenvalue instead")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("potential is singular at node {node} (x = {x})")]
    SingularPotential { node: usize, x: f64 },

    /// An eigenvector or solution did not meet the accuracy a computation requires.
    #[error("{what}: residual {residual:.3e} exceeds {limit:.1e}")]
    ResidualTooLarge {
        what: &'static str,
        residual: f64,
        limit: f64,
    },

    /// An experiment step failed for a specific mode and parameter.
    #[error("mode {mode} at eps = {eps}: {source}")]
    LocationFailed {
        mode: usize,
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
