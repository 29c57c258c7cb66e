//! Inference, cost accounting and post-processing for Phantom-style lightweight detectors.

pub mod blocks;
pub mod error;
pub mod frames;
pub mod netgraph;
pub mod postprocess;
pub mod tensor;

pub use error::{Error, Result};
