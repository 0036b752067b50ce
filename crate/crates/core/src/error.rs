use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration diverged at step {step} (non-finite state)")]
    Divergence { step: usize },

    #[error("dimension {row} is degenerate (std below 1e-12)")]
    DegenerateDimension { row: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("no periodicity: best autocorrelation {correlation:.3} at lag {lag} is below threshold {threshold}")]
    NoPeriodicity { lag: usize, correlation: f64, threshold: f64 },

    #[error("insufficient data: {found} valid neighbor pairs, need at least {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDivergence { epoch: usize, batch: usize },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("malformed {kind}: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(kind: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { kind, reason: reason.into() }
    }
}
