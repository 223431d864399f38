//! Debate dynamics for knowledge-graph reasoning.
//!
//! Two policy agents walk the graph from the subject of a query triple and
//! present the paths they extract as arguments. A feed-forward judge sums the
//! per-argument representations and classifies the triple; the same judge
//! scores each argument individually to reward the agents.
//!
//! The crate is `no_std` (it needs `alloc`). File IO, the command line and the
//! HTTP service live in the companion `r2d2` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent;
pub mod autodiff;
pub mod config;
pub mod debate;
pub mod error;
pub mod judge;
pub mod kg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use config::{DebateConfig, ModelConfig, SamplingMode, TrainConfig};
pub use debate::{Argument, Transcript};
pub use error::{Error, Result};
pub use kg::{EntityId, KnowledgeGraph, Query, RelationId, Triple, Vocab};
pub use model::Model;
