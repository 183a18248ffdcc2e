//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    /// Physical parameters failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A mode profile or coupling graph failed validation.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// A quench protocol or initial state failed validation.
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    /// Configuration file could not be parsed or violates the schema.
    #[error("config error: {0}")]
    Config(String),

    /// The adaptive integrator could not reach the requested time.
    #[error("integration failed at t = {t_reached}: {message}")]
    Integration { t_reached: f64, message: String },

    /// A least-squares fit did not converge or the data carry no signal.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Problem size exceeds what the dense oracle representations support.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Probability leaked into the truncation boundary of a Fock basis.
    #[error("Fock cutoff leakage: {0}")]
    CutoffLeakage(String),

    /// A cross-engine comparison exceeded its tolerance.
    #[error("oracle comparison failed: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
