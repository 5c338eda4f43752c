use thiserror::Error;

use crate::games::JointPoint;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("input outside the valid domain: {0}")]
    InputDomain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("game has no stationary point: {0}")]
    UnsupportedGame(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("iterates diverged at step {step}")]
    Divergence {
        step: usize,
        /// Last state whose coordinates were all finite.
        last_finite: Box<JointPoint>,
    },

    #[error("tape error: {0}")]
    State(String),

    #[error("rate not measurable: {0}")]
    NotMeasurable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
