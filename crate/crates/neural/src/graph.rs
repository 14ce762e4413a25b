use std::collections::{BTreeMap, HashSet};

use pulsebench_core::numerics::Tensor;

use crate::error::{Error, Result};
use crate::layers::{Layer, Mode, SpectralActivation};
use crate::scalar::Real;

/// An ordered stack of layers with a fixed per-sample input shape.
#[derive(Debug, Clone)]
pub struct ModelGraph<T: Real> {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<Box<dyn Layer<T>>>,
    forwarded: bool,
}

/// Per-layer row of a model summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LayerSummary {
    pub layer: String,
    pub output: Vec<usize>,
    pub params: usize,
    pub macs: u64,
}

impl<T: Real> ModelGraph<T> {
    /// Validates shape compatibility along the stack and tensor-name uniqueness.
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        layers: Vec<Box<dyn Layer<T>>>,
    ) -> Result<Self> {
        let graph = Self {
            name: name.into(),
            input_shape,
            layers,
            forwarded: false,
        };
        graph.summary()?;
        let mut seen = HashSet::new();
        for n in graph.tensor_names() {
            if !seen.insert(n.clone()) {
                return Err(Error::Config(format!("duplicate tensor name {n}")));
            }
        }
        Ok(graph)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for l in &self.layers {
            shape = l.output_shape(&shape)?;
        }
        Ok(shape)
    }

    pub fn layers(&self) -> &[Box<dyn Layer<T>>] {
        &self.layers
    }

    pub fn summary(&self) -> Result<Vec<LayerSummary>> {
        let mut shape = self.input_shape.clone();
        let mut rows = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let macs = l.macs(&shape);
            shape = l.output_shape(&shape)?;
            rows.push(LayerSummary {
                layer: l.describe(),
                output: shape.clone(),
                params: l.params().iter().map(|p| p.value.len()).sum(),
                macs,
            });
        }
        Ok(rows)
    }

    /// Learnable elements: conv weights and biases plus BN affine terms.
    pub fn count_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.value.len())
            .sum()
    }

    pub fn count_macs(&self) -> u64 {
        let mut shape = self.input_shape.clone();
        let mut total = 0;
        for l in &self.layers {
            total += l.macs(&shape);
            match l.output_shape(&shape) {
                Ok(s) => shape = s,
                Err(_) => break,
            }
        }
        total
    }

    /// FLOPs per frame with 1 MAC = 2 FLOPs, convolutions only.
    pub fn count_flops(&self, frames: usize) -> f64 {
        2.0 * self.count_macs() as f64 / frames as f64
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.rank() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::Shape(format!(
                "{} expects [batch, {:?}], got {:?}",
                self.name,
                self.input_shape,
                x.shape()
            )));
        }
        self.forwarded = false;
        let mut h = x.clone();
        for l in self.layers.iter_mut() {
            h = l.forward(&h, mode)?;
        }
        self.forwarded = true;
        Ok(h)
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if !self.forwarded {
            return Err(Error::State(format!(
                "{}: backward without a cached forward",
                self.name
            )));
        }
        self.forwarded = false;
        let mut g = grad_out.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    pub fn clear_cache(&mut self) {
        self.forwarded = false;
        self.layers.iter_mut().for_each(|l| l.clear_cache());
    }

    pub fn zero_grad(&mut self) {
        for l in self.layers.iter_mut() {
            l.params_mut().into_iter().for_each(|p| p.zero_grad());
        }
    }

    pub fn params(&self) -> Vec<&crate::layers::Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut crate::layers::Param<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in &self.layers {
            names.extend(l.params().iter().map(|p| p.name.clone()));
            names.extend(l.buffers().iter().map(|b| b.name.clone()));
        }
        names
    }

    /// Parameters and persistent buffers in layer order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.params().iter().map(|p| (p.name.clone(), p.value.clone())));
            out.extend(
                l.buffers()
                    .iter()
                    .map(|b| (b.name.clone(), b.value.clone())),
            );
        }
        out
    }

    /// Replaces every parameter and buffer from `tensors`. Fails on the
    /// first missing name or shape mismatch without modifying the model.
    pub fn load_named(&mut self, tensors: &BTreeMap<String, Tensor<T>>) -> Result<()> {
        for (name, current) in self.named_tensors() {
            let t = tensors.get(&name).ok_or_else(|| Error::Load {
                name: name.clone(),
                reason: "missing from weight file".into(),
            })?;
            if t.shape() != current.shape() {
                return Err(Error::Load {
                    name,
                    reason: format!(
                        "shape {:?} does not match model {:?}",
                        t.shape(),
                        current.shape()
                    ),
                });
            }
        }
        if tensors.len() != self.tensor_names().len() {
            let known: HashSet<String> = self.tensor_names().into_iter().collect();
            if let Some(extra) = tensors.keys().find(|k| !known.contains(*k)) {
                return Err(Error::Load {
                    name: extra.clone(),
                    reason: format!("not a tensor of {}", self.name),
                });
            }
        }
        for l in self.layers.iter_mut() {
            for p in l.params_mut() {
                p.value = tensors[&p.name].clone();
                p.zero_grad();
            }
            for b in l.buffers_mut() {
                b.value = tensors[&b.name].clone();
            }
        }
        self.clear_cache();
        Ok(())
    }

    /// Converts element type, e.g. `f32` weights into an `f64` model.
    pub fn cast<U: Real>(&self, target: &mut ModelGraph<U>) -> Result<()> {
        let map = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.map(|v| U::real(v.as_f64()))))
            .collect();
        target.load_named(&map)
    }

    /// Eval-mode activations of every spectral block for one sample.
    pub fn trace_spectral(&mut self, x: &Tensor<T>) -> Result<Vec<SpectralActivation<T>>> {
        let mut shape = vec![1];
        shape.extend_from_slice(&self.input_shape);
        let mut h = x.clone().reshape(shape)?;
        let mut traces = Vec::new();
        for l in self.layers.iter_mut() {
            if let Some(block) = l.as_spectral_mut() {
                let sample = h.shape()[1..].to_vec();
                traces.push(block.trace(&h.clone().reshape(sample)?)?);
            }
            h = l.forward(&h, Mode::Eval)?;
        }
        self.clear_cache();
        Ok(traces)
    }
}
