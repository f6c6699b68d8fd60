use thiserror::Error;

pub type Result<T> = std::result::Result<T, ElaxError>;

/// Failure modes shared by every solver and analysis routine.
#[derive(Debug, Error)]
pub enum ElaxError {
    /// Invalid grid, unsupported transform size or bad parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Arguments that are individually valid but do not fit together (grid mismatch, wrong arity).
    #[error("usage error: {0}")]
    Usage(String),
    /// Non-finite values or runaway enstrophy during time stepping.
    #[error("numerical blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
    /// A quantity that must be nonzero for the check to mean anything vanished.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Dense solver failure, ill-conditioning, or missed convergence.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
