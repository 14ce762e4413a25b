use pulsebench_core::numerics::Tensor;
use rand::Rng;

use super::{split_batch, Layer, Mode, Param};
use crate::error::{Error, Result};
use crate::scalar::{gemm, Real};

/// Temporal padding rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    /// Output length equals input length (stride 1 only); the extra zero for
    /// even kernels goes on the right.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dims {
    One,
    Three,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    cols: Vec<T>,
    /// Weights permuted to `[kernel_pos * cin + ci, cout]`.
    wt: Vec<T>,
    batch: usize,
    input: [usize; 3],
    output: [usize; 3],
}

/// Convolution over `[B, L, Cin]` (1D) or `[B, T, H, W, Cin]` (3D, valid in
/// space, configurable padding in time). Implemented as im2col + gemm.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    dims: Dims,
    cin: usize,
    cout: usize,
    kernel: [usize; 3],
    stride: [usize; 3],
    padding: Padding,
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<Cache<T>>,
}

fn he_uniform<T: Real, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::real(rng.random_range(-bound..bound)))
}

impl<T: Real> Conv<T> {
    fn build<R: Rng>(
        name: &str,
        dims: Dims,
        cin: usize,
        cout: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: Padding,
        rng: &mut R,
    ) -> Result<Self> {
        if cin == 0 || cout == 0 || kernel.contains(&0) || stride.contains(&0) {
            return Err(Error::Config(format!("{name}: zero-sized convolution")));
        }
        if padding == Padding::Same && stride[0] != 1 {
            return Err(Error::Config(format!(
                "{name}: same padding requires stride 1"
            )));
        }
        let kvol: usize = kernel.iter().product();
        let wshape: Vec<usize> = match dims {
            Dims::One => vec![cout, cin, kernel[0]],
            Dims::Three => vec![cout, cin, kernel[0], kernel[1], kernel[2]],
        };
        Ok(Self {
            dims,
            cin,
            cout,
            kernel,
            stride,
            padding,
            weight: Param::new(
                format!("{name}.weight"),
                he_uniform(&wshape, cin * kvol, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[cout])),
            cache: None,
        })
    }

    /// Weights `cout x cin x k`, He-uniform initialised; zero bias.
    pub fn conv1d<R: Rng>(
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: Padding,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(
            name,
            Dims::One,
            cin,
            cout,
            [k, 1, 1],
            [stride, 1, 1],
            padding,
            rng,
        )
    }

    /// Weights `cout x cin x kt x kh x kw`.
    pub fn conv3d<R: Rng>(
        name: &str,
        cin: usize,
        cout: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        time_padding: Padding,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(
            name,
            Dims::Three,
            cin,
            cout,
            kernel,
            stride,
            time_padding,
            rng,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    fn time_pad(&self) -> (usize, usize) {
        match self.padding {
            Padding::Valid => (0, 0),
            Padding::Same => {
                let total = self.kernel[0] - 1;
                (total / 2, total - total / 2)
            }
        }
    }

    fn rank(&self) -> usize {
        match self.dims {
            Dims::One => 2,
            Dims::Three => 4,
        }
    }

    /// `(T, H, W, C)` view of a per-sample shape.
    fn spatial(&self, sample: &[usize]) -> Result<([usize; 3], usize)> {
        match (self.dims, sample) {
            (Dims::One, &[l, c]) => Ok(([l, 1, 1], c)),
            (Dims::Three, &[t, h, w, c]) => Ok(([t, h, w], c)),
            _ => Err(Error::Shape(format!(
                "{} cannot take input {sample:?}",
                self.describe()
            ))),
        }
    }

    fn out_dims(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let (pl, pr) = self.time_pad();
        let padded = [input[0] + pl + pr, input[1], input[2]];
        let mut out = [0; 3];
        for d in 0..3 {
            if padded[d] < self.kernel[d] {
                return Err(Error::TooShort(format!(
                    "{}: extent {} along axis {d} is shorter than the kernel {}",
                    self.describe(),
                    padded[d],
                    self.kernel[d]
                )));
            }
            out[d] = (padded[d] - self.kernel[d]) / self.stride[d] + 1;
        }
        Ok(out)
    }

    fn kcols(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    /// Calls `f(col_offset, src_offset)` for every kernel tap of output
    /// position `(b, to, ho, wo)` that lands inside the input; both offsets
    /// address the start of a run of `cin` contiguous values.
    fn for_each_tap(
        &self,
        input: [usize; 3],
        b: usize,
        pos: [usize; 3],
        mut f: impl FnMut(usize, usize),
    ) {
        let (pl, _) = self.time_pad();
        let [kt, kh, kw] = self.kernel;
        let [t, h, w] = input;
        for dt in 0..kt {
            let ti = (pos[0] * self.stride[0] + dt) as isize - pl as isize;
            if ti < 0 || ti >= t as isize {
                continue;
            }
            for dh in 0..kh {
                let hi = pos[1] * self.stride[1] + dh;
                for dw in 0..kw {
                    let wi = pos[2] * self.stride[2] + dw;
                    let kpos = (dt * kh + dh) * kw + dw;
                    let src = (((b * t + ti as usize) * h + hi) * w + wi) * self.cin;
                    f(kpos * self.cin, src);
                }
            }
        }
    }

    fn permuted_weights(&self) -> Vec<T> {
        let kvol: usize = self.kernel.iter().product();
        let w = self.weight.value.data();
        let mut wt = vec![T::zero(); self.kcols() * self.cout];
        for co in 0..self.cout {
            for ci in 0..self.cin {
                for kpos in 0..kvol {
                    wt[(kpos * self.cin + ci) * self.cout + co] =
                        w[(co * self.cin + ci) * kvol + kpos];
                }
            }
        }
        wt
    }
}

impl<T: Real> Layer<T> for Conv<T> {
    fn describe(&self) -> String {
        let pad = match self.padding {
            Padding::Valid => "valid",
            Padding::Same => "same",
        };
        match self.dims {
            Dims::One => format!(
                "Conv1D({}->{}, K={}, S={}, {pad})",
                self.cin, self.cout, self.kernel[0], self.stride[0]
            ),
            Dims::Three => format!(
                "Conv3D({}->{}, K={:?}, S={:?}, time {pad})",
                self.cin, self.cout, self.kernel, self.stride
            ),
        }
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (dims, c) = self.spatial(input)?;
        if c != self.cin {
            return Err(Error::Shape(format!(
                "{} got {c} input channels",
                self.describe()
            )));
        }
        let o = self.out_dims(dims)?;
        Ok(match self.dims {
            Dims::One => vec![o[0], self.cout],
            Dims::Three => vec![o[0], o[1], o[2], self.cout],
        })
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (batch, sample) = split_batch(x.shape(), self.rank(), "convolution")?;
        let out_sample = self.output_shape(&sample)?;
        let (input, _) = self.spatial(&sample)?;
        let output = self.out_dims(input)?;
        let rows = batch * output.iter().product::<usize>();
        let kcols = self.kcols();
        let cin = self.cin;

        let xd = x.data();
        let mut cols = vec![T::zero(); rows * kcols];
        let mut row = 0;
        for b in 0..batch {
            for to in 0..output[0] {
                for ho in 0..output[1] {
                    for wo in 0..output[2] {
                        let base = row * kcols;
                        self.for_each_tap(input, b, [to, ho, wo], |col, src| {
                            cols[base + col..base + col + cin].copy_from_slice(&xd[src..src + cin]);
                        });
                        row += 1;
                    }
                }
            }
        }

        let wt = self.permuted_weights();
        let mut out = vec![T::zero(); rows * self.cout];
        gemm(
            rows,
            kcols,
            self.cout,
            (&cols, kcols, 1),
            (&wt, self.cout, 1),
            &mut out,
            (self.cout, 1),
            false,
        );
        let bias = self.bias.value.data();
        for r in out.chunks_exact_mut(self.cout) {
            for (v, &b) in r.iter_mut().zip(bias) {
                *v = *v + b;
            }
        }
        self.cache = Some(Cache {
            cols,
            wt,
            batch,
            input,
            output,
        });
        let mut shape = vec![batch];
        shape.extend(out_sample);
        Ok(Tensor::new(shape, out)?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| {
            Error::State(format!("{}: backward without forward", self.describe()))
        })?;
        let rows = cache.batch * cache.output.iter().product::<usize>();
        if grad_out.len() != rows * self.cout {
            return Err(Error::Shape(format!(
                "{}: gradient of {} values for {rows}x{} output",
                self.describe(),
                grad_out.len(),
                self.cout
            )));
        }
        let g = grad_out.data();
        let kcols = self.kcols();
        let kvol: usize = self.kernel.iter().product();

        let mut dwt = vec![T::zero(); kcols * self.cout];
        gemm(
            kcols,
            rows,
            self.cout,
            (&cache.cols, 1, kcols),
            (g, self.cout, 1),
            &mut dwt,
            (self.cout, 1),
            false,
        );
        let wg = self.weight.grad.data_mut();
        for co in 0..self.cout {
            for ci in 0..self.cin {
                for kpos in 0..kvol {
                    let v = &mut wg[(co * self.cin + ci) * kvol + kpos];
                    *v = *v + dwt[(kpos * self.cin + ci) * self.cout + co];
                }
            }
        }
        let bg = self.bias.grad.data_mut();
        for r in g.chunks_exact(self.cout) {
            for (acc, &v) in bg.iter_mut().zip(r) {
                *acc = *acc + v;
            }
        }

        let mut dcols = vec![T::zero(); rows * kcols];
        gemm(
            rows,
            self.cout,
            kcols,
            (g, self.cout, 1),
            (&cache.wt, 1, self.cout),
            &mut dcols,
            (kcols, 1),
            false,
        );
        let input = cache.input;
        let in_len = cache.batch * input.iter().product::<usize>() * self.cin;
        let mut dx = vec![T::zero(); in_len];
        let cin = self.cin;
        let mut row = 0;
        for b in 0..cache.batch {
            for to in 0..cache.output[0] {
                for ho in 0..cache.output[1] {
                    for wo in 0..cache.output[2] {
                        let base = row * kcols;
                        self.for_each_tap(input, b, [to, ho, wo], |col, src| {
                            for c in 0..cin {
                                dx[src + c] = dx[src + c] + dcols[base + col + c];
                            }
                        });
                        row += 1;
                    }
                }
            }
        }
        let shape = match self.dims {
            Dims::One => vec![cache.batch, input[0], cin],
            Dims::Three => vec![cache.batch, input[0], input[1], input[2], cin],
        };
        Ok(Tensor::new(shape, dx)?)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn macs(&self, input: &[usize]) -> u64 {
        match self.spatial(input).and_then(|(d, _)| self.out_dims(d)) {
            Ok(o) => (o.iter().product::<usize>() * self.cout * self.kcols()) as u64,
            Err(_) => 0,
        }
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn box_clone(&self) -> Box<dyn Layer<T>> {
        Box::new(self.clone())
    }
}
