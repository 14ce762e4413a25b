use pulsebench_core::numerics::Tensor;

use super::{Buffer, Layer, Mode, Param};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
struct Cache<T> {
    xhat: Vec<T>,
    inv_std: Vec<f64>,
    batch_stats: bool,
    shape: Vec<usize>,
}

/// Per-channel normalization over the last axis; statistics are taken over
/// every other axis (batch and time).
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T> {
    channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Buffer<T>,
    pub running_var: Buffer<T>,
    cache: Option<Cache<T>>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(
                format!("{name}.gamma"),
                Tensor::from_fn(&[channels], |_| T::one()),
            ),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: Buffer {
                name: format!("{name}.running_mean"),
                value: Tensor::zeros(&[channels]),
            },
            running_var: Buffer {
                name: format!("{name}.running_var"),
                value: Tensor::from_fn(&[channels], |_| T::one()),
            },
            cache: None,
        }
    }
}

impl<T: Real> Layer<T> for BatchNorm1d<T> {
    fn describe(&self) -> String {
        format!("BatchNorm({})", self.channels)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input.last() {
            Some(&c) if c == self.channels => Ok(input.to_vec()),
            _ => Err(Error::Shape(format!(
                "{} cannot take {input:?}",
                self.describe()
            ))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let c = self.channels;
        if x.rank() < 2 || x.shape().last() != Some(&c) {
            return Err(Error::Shape(format!(
                "{} cannot take {:?}",
                self.describe(),
                x.shape()
            )));
        }
        let rows = x.len() / c;
        let xd = x.data();
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; c];
                for r in xd.chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(r) {
                        *m += v.as_f64();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; c];
                for r in xd.chunks_exact(c) {
                    for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                        let d = v.as_f64() - m;
                        *s += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= rows as f64);
                let rm = self.running_mean.value.data_mut();
                for (r, &m) in rm.iter_mut().zip(&mean) {
                    *r = T::real((1.0 - BN_MOMENTUM) * r.as_f64() + BN_MOMENTUM * m);
                }
                let rv = self.running_var.value.data_mut();
                for (r, &v) in rv.iter_mut().zip(&var) {
                    *r = T::real((1.0 - BN_MOMENTUM) * r.as_f64() + BN_MOMENTUM * v);
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean
                    .value
                    .data()
                    .iter()
                    .map(|v| v.as_f64())
                    .collect(),
                self.running_var
                    .value
                    .data()
                    .iter()
                    .map(|v| v.as_f64())
                    .collect(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut xhat = Vec::with_capacity(x.len());
        let mut out = Vec::with_capacity(x.len());
        for r in xd.chunks_exact(c) {
            for ch in 0..c {
                let h = T::real((r[ch].as_f64() - mean[ch]) * inv_std[ch]);
                xhat.push(h);
                out.push(gamma[ch] * h + beta[ch]);
            }
        }
        self.cache = Some(Cache {
            xhat,
            inv_std,
            batch_stats: mode == Mode::Train,
            shape: x.shape().to_vec(),
        });
        Ok(Tensor::new(x.shape().to_vec(), out)?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| {
            Error::State(format!("{}: backward without forward", self.describe()))
        })?;
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::Shape(format!(
                "{}: gradient shape {:?} != {:?}",
                self.describe(),
                grad_out.shape(),
                cache.shape
            )));
        }
        let c = self.channels;
        let rows = grad_out.len() / c;
        let g = grad_out.data();
        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for (gr, hr) in g.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                sum_g[ch] += gr[ch].as_f64();
                sum_gx[ch] += gr[ch].as_f64() * hr[ch].as_f64();
            }
        }
        {
            let gg = self.gamma.grad.data_mut();
            for ch in 0..c {
                gg[ch] = gg[ch] + T::real(sum_gx[ch]);
            }
            let bg = self.beta.grad.data_mut();
            for ch in 0..c {
                bg[ch] = bg[ch] + T::real(sum_g[ch]);
            }
        }
        let gamma = self.gamma.value.data();
        let m = rows as f64;
        let mut dx = Vec::with_capacity(g.len());
        for (gr, hr) in g.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                let scale = gamma[ch].as_f64() * cache.inv_std[ch];
                let v = if cache.batch_stats {
                    scale / m * (m * gr[ch].as_f64() - sum_g[ch] - hr[ch].as_f64() * sum_gx[ch])
                } else {
                    scale * gr[ch].as_f64()
                };
                dx.push(T::real(v));
            }
        }
        Ok(Tensor::new(cache.shape, dx)?)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&Buffer<T>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Buffer<T>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}
