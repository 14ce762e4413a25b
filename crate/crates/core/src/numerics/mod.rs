//! Dense tensors, the real FFT pair, and the statistics helpers shared by the
//! rest of the pipeline.

mod fft;
mod interp;
mod stats;
mod tensor;

pub use fft::{irfft, rfft, ComplexSeq, FftPlan};
pub use interp::linear_interp;
pub use stats::{mean, mean_std, pearson};
pub use tensor::Tensor;
