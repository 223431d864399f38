//! Reverse-mode differentiation over a per-rollout tape, plus Adam.

mod adam;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{NodeId, Tape};

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("softmax mask admits no position")]
    EmptySupport,

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("{op}: index {index} out of range {len}")]
    OutOfRange { op: &'static str, index: usize, len: usize },
}
