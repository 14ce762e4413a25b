use pulsebench_core::numerics::{ComplexSeq, FftPlan, Tensor};
use rand::Rng;

use super::{split_batch, BatchNorm1d, Buffer, Conv, Layer, Mode, Padding, Param, Relu};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Intermediates of one spectral transformation, for a single sample.
#[derive(Debug, Clone)]
pub struct SpectralActivation<T> {
    /// `N x C` input.
    pub y_time: Tensor<T>,
    /// One spectrum of `F = N/2 + 1` bins per channel.
    pub y_freq: Vec<ComplexSeq<T>>,
    /// `F x 2C`: real parts in the first `C` columns, imaginary parts in the last `C`.
    pub y_comb: Tensor<T>,
    /// `N x C` output, residual included.
    pub y_out: Tensor<T>,
}

/// rfft per channel, Conv1D-BN-ReLU across the frequency axis on the packed
/// real/imaginary spectrum, irfft back, plus the input.
#[derive(Debug, Clone)]
pub struct SpectralBlock<T: Real> {
    channels: usize,
    kernel: usize,
    conv: Conv<T>,
    bn: BatchNorm1d<T>,
    relu: Relu,
    plan: Option<FftPlan<T>>,
    cache: Option<(usize, usize)>,
}

pub const MIN_SPECTRAL_LEN: usize = 4;

struct Pass<T> {
    packed: Vec<T>,
    out: Vec<T>,
}

impl<T: Real> SpectralBlock<T> {
    pub fn new<R: Rng>(name: &str, channels: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            channels,
            kernel,
            conv: Conv::conv1d(
                &format!("{name}.conv"),
                2 * channels,
                2 * channels,
                kernel,
                1,
                Padding::Same,
                rng,
            )?,
            bn: BatchNorm1d::new(&format!("{name}.bn"), 2 * channels),
            relu: Relu::new(),
            plan: None,
            cache: None,
        })
    }

    pub fn conv(&self) -> &Conv<T> {
        &self.conv
    }

    pub fn conv_mut(&mut self) -> &mut Conv<T> {
        &mut self.conv
    }

    pub fn bn_mut(&mut self) -> &mut BatchNorm1d<T> {
        &mut self.bn
    }

    fn plan(&mut self, n: usize) -> Result<FftPlan<T>> {
        match &self.plan {
            Some(p) if p.len() == n => Ok(p.clone()),
            _ => {
                let p = FftPlan::new(n)?;
                self.plan = Some(p.clone());
                Ok(p)
            }
        }
    }

    fn check_input(&self, shape: &[usize]) -> Result<(usize, usize)> {
        let (b, sample) = split_batch(shape, 2, "SpectralBlock")?;
        if sample[1] != self.channels {
            return Err(Error::Shape(format!(
                "{} got {} channels",
                Layer::<T>::describe(self),
                sample[1]
            )));
        }
        if sample[0] < MIN_SPECTRAL_LEN {
            return Err(Error::TooShort(format!(
                "spectral block needs at least {MIN_SPECTRAL_LEN} steps, got {}",
                sample[0]
            )));
        }
        Ok((b, sample[0]))
    }

    fn run(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Pass<T>> {
        let (batch, n) = self.check_input(x.shape())?;
        let c = self.channels;
        let plan = self.plan(n)?;
        let f = plan.bins();
        let xd = x.data();

        let mut packed = vec![T::zero(); batch * f * 2 * c];
        let mut col = vec![T::zero(); n];
        let (mut re, mut im) = (vec![T::zero(); f], vec![T::zero(); f]);
        for b in 0..batch {
            for ch in 0..c {
                for t in 0..n {
                    col[t] = xd[(b * n + t) * c + ch];
                }
                plan.rfft_into(&col, &mut re, &mut im);
                for k in 0..f {
                    let row = (b * f + k) * 2 * c;
                    packed[row + ch] = re[k];
                    packed[row + c + ch] = im[k];
                }
            }
        }

        let p = Tensor::new(vec![batch, f, 2 * c], packed.clone())?;
        let h = self.conv.forward(&p, mode)?;
        let h = self.bn.forward(&h, mode)?;
        let h = self.relu.forward(&h, mode)?;
        let hd = h.data();

        let mut out = xd.to_vec();
        for b in 0..batch {
            for ch in 0..c {
                for k in 0..f {
                    let row = (b * f + k) * 2 * c;
                    re[k] = hd[row + ch];
                    im[k] = hd[row + c + ch];
                }
                plan.irfft_into(&re, &im, &mut col);
                for t in 0..n {
                    let o = &mut out[(b * n + t) * c + ch];
                    *o = *o + col[t];
                }
            }
        }
        self.cache = Some((batch, n));
        Ok(Pass { packed, out })
    }

    /// Eval-mode pass over one `N x C` sample, returning every intermediate.
    pub fn trace(&mut self, y: &Tensor<T>) -> Result<SpectralActivation<T>> {
        let shape = y.shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::Shape(format!("trace expects N x C, got {shape:?}")));
        }
        let batched = y.clone().reshape(vec![1, shape[0], shape[1]])?;
        let pass = self.run(&batched, Mode::Eval)?;
        self.clear_cache();
        let (n, c) = (shape[0], shape[1]);
        let f = n / 2 + 1;
        let y_freq = (0..c)
            .map(|ch| {
                let re = (0..f).map(|k| pass.packed[k * 2 * c + ch]).collect();
                let im = (0..f).map(|k| pass.packed[k * 2 * c + c + ch]).collect();
                ComplexSeq { re, im }
            })
            .collect();
        Ok(SpectralActivation {
            y_time: y.clone(),
            y_freq,
            y_comb: Tensor::new(vec![f, 2 * c], pass.packed)?,
            y_out: Tensor::new(shape, pass.out)?,
        })
    }
}

impl<T: Real> Layer<T> for SpectralBlock<T> {
    fn describe(&self) -> String {
        format!(
            "Spectral(C={}, freq conv {}->{} K={})",
            self.channels,
            2 * self.channels,
            2 * self.channels,
            self.kernel
        )
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut batched = vec![1];
        batched.extend_from_slice(input);
        self.check_input(&batched)?;
        Ok(input.to_vec())
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let pass = self.run(x, mode)?;
        Ok(Tensor::new(x.shape().to_vec(), pass.out)?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, n) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("SpectralBlock: backward without forward".into()))?;
        let c = self.channels;
        if grad_out.shape() != [batch, n, c] {
            return Err(Error::Shape(format!(
                "SpectralBlock: gradient shape {:?}",
                grad_out.shape()
            )));
        }
        let plan = self.plan(n)?;
        let f = plan.bins();
        let g = grad_out.data();
        let nf = T::real(n as f64);
        // Bins appearing once in a length-n real signal: DC, and Nyquist for even n.
        let single = |k: usize| k == 0 || (n % 2 == 0 && k == n / 2);

        // Adjoint of irfft: dZ_k = c_k / n * rfft(g)_k, c_k = 1 for single bins, 2 otherwise.
        let mut dh = vec![T::zero(); batch * f * 2 * c];
        let mut col = vec![T::zero(); n];
        let (mut re, mut im) = (vec![T::zero(); f], vec![T::zero(); f]);
        for b in 0..batch {
            for ch in 0..c {
                for t in 0..n {
                    col[t] = g[(b * n + t) * c + ch];
                }
                plan.rfft_into(&col, &mut re, &mut im);
                for k in 0..f {
                    let ck = if single(k) { T::one() } else { T::real(2.0) };
                    let row = (b * f + k) * 2 * c;
                    dh[row + ch] = re[k] * ck / nf;
                    dh[row + c + ch] = if single(k) {
                        T::zero()
                    } else {
                        im[k] * ck / nf
                    };
                }
            }
        }
        let dh = Tensor::new(vec![batch, f, 2 * c], dh)?;
        let dh = self.relu.backward(&dh)?;
        let dh = self.bn.backward(&dh)?;
        let dp = self.conv.backward(&dh)?;
        let dpd = dp.data();

        // Adjoint of rfft: dx = n * irfft(dZ) with non-single bins halved.
        let half = T::real(0.5);
        let mut dx = g.to_vec();
        for b in 0..batch {
            for ch in 0..c {
                for k in 0..f {
                    let row = (b * f + k) * 2 * c;
                    let s = if single(k) { T::one() } else { half };
                    re[k] = dpd[row + ch] * s;
                    im[k] = dpd[row + c + ch] * s;
                }
                plan.irfft_into(&re, &im, &mut col);
                for t in 0..n {
                    let o = &mut dx[(b * n + t) * c + ch];
                    *o = *o + col[t] * nf;
                }
            }
        }
        Ok(Tensor::new(vec![batch, n, c], dx)?)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.conv.params();
        p.extend(self.bn.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.conv.params_mut();
        p.extend(self.bn.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Buffer<T>> {
        self.bn.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Buffer<T>> {
        self.bn.buffers_mut()
    }

    fn macs(&self, input: &[usize]) -> u64 {
        match input {
            &[n, _] => self.conv.macs(&[n / 2 + 1, 2 * self.channels]),
            _ => 0,
        }
    }

    fn clear_cache(&mut self) {
        self.cache = None;
        self.conv.clear_cache();
        Layer::<T>::clear_cache(&mut self.bn);
        Layer::<T>::clear_cache(&mut self.relu);
    }

    fn as_spectral_mut(&mut self) -> Option<&mut SpectralBlock<T>> {
        Some(self)
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}
