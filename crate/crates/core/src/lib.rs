//! Novelty detection testbed for world-model agents.
//!
//! The crate bundles a small deterministic gridworld with injectable visual and
//! functional novelties, a count-based categorical world model, the detection
//! kernels that score each step, and the harness that turns episode traces into
//! delay, confusion and AUC metrics.

pub mod cli;
pub mod detectors;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod world_model;

pub use error::{Error, Result};
