use thiserror::Error;

/// Errors surfaced by the solver stack.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "eigensolver did not converge after {iterations} iterations \
         (worst residual {best_residual:.3e}, tolerance {tol:.3e})"
    )]
    EigNotConverged {
        iterations: usize,
        best_residual: f64,
        tol: f64,
    },

    #[error("coherent-state truncation tail {tail:.3e} exceeds budget {budget:.3e}; need n_max >= {required_n_max}")]
    TruncationTail {
        tail: f64,
        budget: f64,
        required_n_max: usize,
    },

    #[error("tensor dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("eigenbasis residual {residual:.3e} exceeds required {tol:.3e} (state {index})")]
    BasisResidual {
        index: usize,
        residual: f64,
        tol: f64,
    },

    #[error(
        "reduced resolvent ill-defined: lambda = {lambda:.12e} lies within {dist:.3e} \
         of eigenvalue {eigenvalue:.12e}"
    )]
    ResolventPole {
        lambda: f64,
        eigenvalue: f64,
        dist: f64,
    },

    #[error("minimizer did not converge: {0}")]
    MinimizeFailed(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
