use thiserror::Error;

use crate::hybrid_state::{ProbeId, QubitId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("probe {0} is not live in this state")]
    UnknownProbe(ProbeId),
    #[error("qubit {qubit} out of range for a register of {size}")]
    QubitOutOfRange { qubit: QubitId, size: usize },
    #[error("impossible outcome: post-measurement norm underflows at x = {x}")]
    ImpossibleOutcome { x: f64 },
    #[error("register mismatch: {0}")]
    RegisterMismatch(String),
    #[error("trial {index} failed: {source}")]
    TrialFailed { index: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
