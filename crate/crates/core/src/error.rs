use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the range where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical kernel failed (eigen-decomposition, projection, linear solve).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Inconsistent problem or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A finite-difference stencil reaches outside the available data.
    #[error("incomplete stencil at node {node}: {detail}")]
    Stencil { node: usize, detail: String },

    /// Newton iteration stopped before reaching the residual target.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Backtracking could not find an admissible step.
    #[error("line search exhausted: {reason} (node {node})")]
    LineSearch { node: usize, reason: String },

    /// Level-set extraction failed.
    #[error("level set extraction failed: {0}")]
    Extraction(String),

    /// Malformed checkpoint or report file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
