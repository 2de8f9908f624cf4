use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two densities (or a density and a game) live on different supports.
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    /// A payoff, value vector or objective produced a non-finite number.
    #[error("non-finite value: {0}")]
    Value(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("kernel evaluated to a non-finite or out-of-range value: {0}")]
    KernelDomain(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: String,
        residual: f64,
        iterations: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
