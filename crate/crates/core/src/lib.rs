//! Virtual strain sensing for bicycle frames.
//!
//! Acceleration segments are mapped to scattering (or FFT) features, reduced
//! by PCA, and regressed onto log fatigue damage of each strain channel. The
//! same reduced features drive kNN classifiers for underground, speed and
//! rider.

pub mod error;
pub mod fatigue;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod reduce;
pub mod synth;

pub use error::{Error, Result};
