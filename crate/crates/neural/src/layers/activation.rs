use pulsebench_core::numerics::Tensor;

use super::{Layer, Mode};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Real> Layer<T> for Relu {
    fn describe(&self) -> String {
        "ReLU".into()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        // NaN passes through so a corrupt input reaches the loss check.
        let mask: Vec<bool> = x.data().iter().map(|&v| !(v <= T::zero())).collect();
        let out = x.map(|v| if v <= T::zero() { T::zero() } else { v });
        self.mask = Some(mask);
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self
            .mask
            .take()
            .ok_or_else(|| Error::State("ReLU: backward without forward".into()))?;
        if mask.len() != grad_out.len() {
            return Err(Error::Shape("ReLU: gradient length mismatch".into()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(&mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Ok(Tensor::new(grad_out.shape().to_vec(), data)?)
    }

    fn clear_cache(&mut self) {
        self.mask = None;
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}
