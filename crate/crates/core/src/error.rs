use thiserror::Error;

/// Crate-wide error type. Validation problems carry the offending key so the
/// CLI can name it on stderr.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integration diverged at step {step} (t = {t}): non-finite state; try a smaller integrator.dt")]
    Diverged { step: u64, t: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("histogram error: {0}")]
    Histogram(String),

    #[error("no flux plateau window: {0}; widen the tolerance explicitly to proceed")]
    NoWindow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
