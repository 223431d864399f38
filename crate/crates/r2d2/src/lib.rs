//! Files, checkpoints, reports, the HTTP service and end-to-end pipelines
//! around the `r2d2-core` debate engine.

pub mod checkpoint;
pub mod config_file;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod pipeline;
pub mod report;
pub mod service;

pub use error::{Error, Result};
pub use r2d2_core as core;
