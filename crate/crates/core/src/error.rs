use thiserror::Error;

/// Errors produced by the grid, solver, moment and learning routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The grid or forest violates a structural invariant (cycle, missing
    /// substation, disconnected node, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An injection model is not a valid distribution.
    #[error("model error: {0}")]
    Model(String),

    /// A hypothesis the computation relies on does not hold for the input.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Iterative solve did not reach the tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// A squared voltage became non-positive during a nonlinear sweep.
    #[error("infeasible state: squared voltage {value:e} at node {node}")]
    Infeasible { node: u32, value: f64 },

    /// Malformed input document.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input that violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
