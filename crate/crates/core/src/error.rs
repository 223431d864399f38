use alloc::string::String;

use crate::autodiff::AutodiffError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty triple file")]
    EmptyInput,

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("no corruption candidate for ({subject}, {predicate}, _)")]
    NoCandidate { subject: usize, predicate: usize },

    #[error("empty action list")]
    EmptyActions,

    #[error("argument has {got} actions, expected {expected}")]
    ArgumentLength { expected: usize, got: usize },

    #[error("transcript has {got} arguments, expected {expected}")]
    ArgumentCount { expected: usize, got: usize },

    #[error("need at least one example of each label")]
    SingleClass,

    #[error("true object is not among the ranking candidates")]
    MissingTrueObject,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
