//! Learning answer set programs from raw data with a perception network.
//!
//! The pipeline abduces latent possibilities, synthesises an optimisable
//! rule space, trains the network and a rule posterior through a semantic
//! loss, and finally solves for a minimal hypothesis.

pub mod abduction;
pub mod asp;
pub mod error;
pub mod gen;
pub mod mode;
pub mod neural;
pub mod pipeline;
pub mod solver;
pub mod synthesis;
pub mod task;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
