use pulsebench_core::numerics::Tensor;

use super::{split_batch, Layer, Mode};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `[B, T, H, W, C] -> [B, T, C]` by averaging over H and W.
#[derive(Debug, Clone, Default)]
pub struct SpatialMean {
    input: Option<Vec<usize>>,
}

impl SpatialMean {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Real> Layer<T> for SpatialMean {
    fn describe(&self) -> String {
        "SpatialMean".into()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            &[t, _, _, c] => Ok(vec![t, c]),
            _ => Err(Error::Shape(format!("SpatialMean cannot take {input:?}"))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (b, sample) = split_batch(x.shape(), 4, "SpatialMean")?;
        let (t, hw, c) = (sample[0], sample[1] * sample[2], sample[3]);
        let scale = T::real(1.0 / hw as f64);
        let mut out = vec![T::zero(); b * t * c];
        for (bt, block) in x.data().chunks_exact(hw * c).enumerate() {
            let dst = &mut out[bt * c..(bt + 1) * c];
            for px in block.chunks_exact(c) {
                for (d, &v) in dst.iter_mut().zip(px) {
                    *d = *d + v;
                }
            }
            dst.iter_mut().for_each(|d| *d = *d * scale);
        }
        self.input = Some(x.shape().to_vec());
        Ok(Tensor::new(vec![b, t, c], out)?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input
            .take()
            .ok_or_else(|| Error::State("SpatialMean: backward without forward".into()))?;
        let (hw, c) = (shape[2] * shape[3], shape[4]);
        if grad_out.len() * hw != shape.iter().product::<usize>() {
            return Err(Error::Shape("SpatialMean: gradient length mismatch".into()));
        }
        let scale = T::real(1.0 / hw as f64);
        let mut dx = Vec::with_capacity(grad_out.len() * hw);
        for g in grad_out.data().chunks_exact(c) {
            for _ in 0..hw {
                dx.extend(g.iter().map(|&v| v * scale));
            }
        }
        Ok(Tensor::new(shape, dx)?)
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}

/// Collapses every per-sample axis: `[B, ...] -> [B, prod(...)]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Real> Layer<T> for Flatten {
    fn describe(&self) -> String {
        "Flatten".into()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        if x.rank() < 1 {
            return Err(Error::Shape("Flatten needs a batch axis".into()));
        }
        let b = x.shape()[0];
        self.input = Some(x.shape().to_vec());
        let n = if b == 0 { 0 } else { x.len() / b };
        Ok(x.clone().reshape(vec![b, n])?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input
            .take()
            .ok_or_else(|| Error::State("Flatten: backward without forward".into()))?;
        Ok(grad_out.clone().reshape(shape)?)
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}
