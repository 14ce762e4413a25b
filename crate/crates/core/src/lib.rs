//! Core building blocks for remote-photoplethysmography benchmarking:
//! numerics, the PBVC clip container, preprocessing, handcrafted pulse
//! extractors, HR/HRV postprocessing and the synthetic clip generator.

pub mod clipio;
pub mod error;
pub mod numerics;
pub mod postprocess;
pub mod preprocess;
pub mod synth;
pub mod unsupervised;

pub use error::{Error, Result};
