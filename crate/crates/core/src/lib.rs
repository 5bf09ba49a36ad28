//! Direction-dependent travel pace from demand and road-orientation histograms.

pub mod circular;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod features;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod rose;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
