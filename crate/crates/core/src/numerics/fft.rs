use std::sync::Arc;

use num_traits::Float;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::error::{Error, Result};

/// One-sided spectrum stored as split real/imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Copy> ComplexSeq<T> {
    pub fn new(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidLength(format!(
                "real part has {} bins, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Forward/inverse real transform pair for a fixed length `n`.
///
/// Any length is supported; composite and prime sizes are dispatched by
/// rustfft's planner (mixed radix, Rader, Bluestein).
#[derive(Clone)]
pub struct FftPlan<T: FftNum> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: FftNum> std::fmt::Debug for FftPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("n", &self.n).finish()
    }
}

impl<T: FftNum + Float> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidLength(format!(
                "FFT length must be >= 2, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of one-sided bins, `n / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// Unnormalized forward transform of `x` (length `n`) into `re`/`im`
    /// (length `n / 2 + 1`).
    pub fn rfft_into(&self, x: &[T], re: &mut [T], im: &mut [T]) {
        assert_eq!(x.len(), self.n);
        let f = self.bins();
        assert!(re.len() == f && im.len() == f);
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward.process(&mut buf);
        for k in 0..f {
            re[k] = buf[k].re;
            im[k] = buf[k].im;
        }
    }

    /// Inverse of [`rfft_into`](Self::rfft_into), scaled by `1/n`.
    ///
    /// The imaginary parts of the DC bin and (for even `n`) the Nyquist bin
    /// have no real-signal counterpart and are ignored.
    pub fn irfft_into(&self, re: &[T], im: &[T], out: &mut [T]) {
        let n = self.n;
        let f = self.bins();
        assert!(re.len() == f && im.len() == f);
        assert_eq!(out.len(), n);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        buf[0] = Complex::new(re[0], T::zero());
        for k in 1..f {
            let nyquist = n.is_multiple_of(2) && k == n / 2;
            if nyquist {
                buf[k] = Complex::new(re[k], T::zero());
            } else {
                buf[k] = Complex::new(re[k], im[k]);
                buf[n - k] = Complex::new(re[k], -im[k]);
            }
        }
        self.inverse.process(&mut buf);
        let scale = T::one() / T::from(n).unwrap();
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
    }
}

/// Real FFT of `x`; returns the `n / 2 + 1` non-redundant bins.
pub fn rfft<T: FftNum + Float>(x: &[T]) -> Result<ComplexSeq<T>> {
    let plan = FftPlan::new(x.len())?;
    let f = plan.bins();
    let mut out = ComplexSeq {
        re: vec![T::zero(); f],
        im: vec![T::zero(); f],
    };
    plan.rfft_into(x, &mut out.re, &mut out.im);
    Ok(out)
}

/// Inverse real FFT producing `n` samples from `n / 2 + 1` bins.
pub fn irfft<T: FftNum + Float>(spectrum: &ComplexSeq<T>, n: usize) -> Result<Vec<T>> {
    if spectrum.re.len() != spectrum.im.len() {
        return Err(Error::InvalidLength(
            "real/imaginary parts differ in length".into(),
        ));
    }
    if n < 2 || spectrum.len() != n / 2 + 1 {
        return Err(Error::InvalidLength(format!(
            "{} bins cannot produce {n} samples (expected {} bins)",
            spectrum.len(),
            n / 2 + 1
        )));
    }
    let plan = FftPlan::new(n)?;
    let mut out = vec![T::zero(); n];
    plan.irfft_into(&spectrum.re, &spectrum.im, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_is_all_dc() {
        let x = rfft(&[1.0f64, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(x.re, vec![4.0, 0.0, 0.0]);
        assert!(x.im.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cosine_lands_in_bin_one() {
        let x = rfft(&[1.0f64, 0.0, -1.0, 0.0]).unwrap();
        for (got, want) in x.re.iter().zip([0.0, 2.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(x.im.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inverse_of_dc_spectrum() {
        let spec = ComplexSeq::new(vec![4.0f64, 0.0, 0.0], vec![0.0; 3]).unwrap();
        let x = irfft(&spec, 4).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn length_errors() {
        assert!(matches!(rfft(&[1.0f32]), Err(Error::InvalidLength(_))));
        let spec = ComplexSeq::new(vec![0.0f32; 4], vec![0.0; 4]).unwrap();
        assert!(matches!(irfft(&spec, 4), Err(Error::InvalidLength(_))));
        assert!(ComplexSeq::new(vec![0.0f32; 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn isolating_bin_one_recovers_the_cosine() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                0.7 * (2.0 * std::f64::consts::PI * t + 0.3).cos()
                    + 0.4 * (2.0 * std::f64::consts::PI * 5.0 * t).sin()
            })
            .collect();
        let mut spec = rfft(&x).unwrap();
        for k in 0..spec.len() {
            if k != 1 {
                spec.re[k] = 0.0;
                spec.im[k] = 0.0;
            }
        }
        let y = irfft(&spec, n).unwrap();
        for (i, v) in y.iter().enumerate() {
            let want = 0.7 * (2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.3).cos();
            assert!((v - want).abs() < 1e-12, "sample {i}: {v} vs {want}");
        }
    }
}
