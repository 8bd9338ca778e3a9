//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition violation on user-supplied data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested computation cannot be resolved on the supplied grids
    /// (Nyquist violations, truncation guards, window-width underflow).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// An iterative expansion failed to converge within its term budget.
    #[error("divergence error: {0}")]
    Divergence(String),

    /// The symbol I + T^(lambda) is numerically singular at some frequency,
    /// so no inverse exists in the algebra.
    #[error("spectral obstruction at lambda = {lambda}: {detail}")]
    SpectralObstruction { lambda: f64, detail: String },

    /// A kernel was evaluated at a singular point (x = y).
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// A linear solve hit a numerically singular factorization.
    #[error("condition failure: {0}")]
    ConditionFailure(String),

    /// The decay-fit window is empty after validity trimming.
    #[error("window error: {0}")]
    Window(String),

    /// Grid size exceeds the configured memory cap.
    #[error("memory guard: {0}")]
    MemoryGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
