//! Checks shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;
pub mod structure;
pub mod toy;
