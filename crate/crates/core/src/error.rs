use std::io;

use thiserror::Error;

pub type Result<T, E = FacError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FacError {
    #[error("non-finite value in matrix input")]
    NonFiniteInput,

    #[error("degenerate rollout: {0}")]
    DegenerateRollout(&'static str),

    #[error("non-finite state component at index {0}")]
    NonFiniteState(usize),

    #[error("transition contains a non-finite field")]
    NonFiniteTransition,

    #[error("non-finite action")]
    NonFiniteAction,

    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("training diverged at step {step}: {what} became non-finite")]
    DivergedTraining { step: u64, what: &'static str },

    #[error("evaluation curve is empty")]
    EmptyCurve,

    #[error("degenerate denominator in {0}")]
    DivisionDegenerate(&'static str),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CorruptSnapshot { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}
