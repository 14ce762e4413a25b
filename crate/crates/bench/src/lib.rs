//! Benchmark harness: pulse algorithms selected by name, moving-window HR
//! scoring, reproducible JSON reports and neural training datasets.

pub mod algorithms;
pub mod clip;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod report;

pub use algorithms::{AlgorithmRegistry, AlgorithmSpec, NeuralAlgorithm, PulseAlgorithm};
pub use clip::{ClipHandle, ClipSource, PreparedClip};
pub use error::{Error, Result};
pub use evaluate::{hr_metrics, windowed_hr, HrMetrics, WindowedEstimate};
pub use report::{evaluate_clip, run_benchmark, AlgorithmReport, BenchConfig, BenchReport};
