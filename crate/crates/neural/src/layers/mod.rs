//! Layer kernels. Every layer caches what its backward pass needs during
//! `forward` and consumes it in `backward`.
//!
//! Activations are channel-last with a leading batch axis: `[B, L, C]` for
//! sequences and `[B, T, H, W, C]` for video.

mod activation;
mod batchnorm;
mod conv;
mod reshape;
pub(crate) mod spectral;

use std::fmt::Debug;

use pulsebench_core::numerics::Tensor;

pub use activation::Relu;
pub use batchnorm::BatchNorm1d;
pub use conv::{Conv, Padding};
pub use reshape::{Flatten, SpatialMean};
pub use spectral::{SpectralActivation, SpectralBlock, MIN_SPECTRAL_LEN};

use crate::error::Result;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for normalization; running statistics are updated.
    Train,
    /// Running statistics; no state changes.
    Eval,
}

/// A learnable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Non-learnable persistent state (BatchNorm running statistics).
#[derive(Debug, Clone)]
pub struct Buffer<T> {
    pub name: String,
    pub value: Tensor<T>,
}

pub trait Layer<T: Real>: Send + Sync + Debug {
    /// Short human-readable description, e.g. `Conv1D(64->64, K=3, S=3, valid)`.
    fn describe(&self) -> String;

    /// Per-sample output shape (no batch axis) for a per-sample input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn buffers(&self) -> Vec<&Buffer<T>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Buffer<T>> {
        Vec::new()
    }

    /// Multiply-accumulates per sample for a per-sample input shape; only
    /// convolutions count.
    fn macs(&self, _input: &[usize]) -> u64 {
        0
    }

    fn clear_cache(&mut self);

    fn as_spectral_mut(&mut self) -> Option<&mut SpectralBlock<T>> {
        None
    }

    fn box_clone(&self) -> Box<dyn Layer<T>>;
}

impl<T: Real> Clone for Box<dyn Layer<T>> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

pub(crate) fn split_batch(shape: &[usize], rank: usize, what: &str) -> Result<(usize, Vec<usize>)> {
    if shape.len() != rank + 1 {
        return Err(crate::Error::Shape(format!(
            "{what} expects a batched rank-{rank} input, got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1..].to_vec()))
}
