use thiserror::Error;

/// Errors raised by the solvers, the kernel checks and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("validity range violated: {0}")]
    Range(String),

    #[error("CFL violation: dt = {dt} exceeds the admissible step {admissible}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("collision solve failed at cell {cell}: {reason}")]
    LinearSolve { cell: usize, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
