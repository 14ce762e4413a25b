//! Handcrafted pulse extractors operating on spatially averaged RGB traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{mean, mean_std, rfft};
use crate::postprocess::{HR_BAND_HI, HR_BAND_LO};

pub const DEFAULT_WINDOW_S: f64 = 1.6;

const ICA_MAX_ITER: usize = 200;
const ICA_TOL: f64 = 1e-6;
const ICA_SEED: u64 = 0x1CA;

/// Spatially averaged colour channels of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTrace {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub fs: f64,
}

impl RgbTrace {
    pub fn new(r: Vec<f64>, g: Vec<f64>, b: Vec<f64>, fs: f64) -> Result<Self> {
        if r.len() != g.len() || r.len() != b.len() {
            return Err(Error::InvalidLength(format!(
                "channel lengths differ: {} / {} / {}",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidArgument(format!("fs must be > 0, got {fs}")));
        }
        Ok(Self { r, g, b, fs })
    }

    /// Per-frame spatial mean of `T x pixels x 3` interleaved frames.
    pub fn from_frames(frames: &[f32], pixels_per_frame: usize, fs: f64) -> Result<Self> {
        let per_frame = pixels_per_frame * 3;
        if per_frame == 0 || !frames.len().is_multiple_of(per_frame) {
            return Err(Error::Shape(format!(
                "{} values is not a whole number of {pixels_per_frame}-pixel frames",
                frames.len()
            )));
        }
        let t = frames.len() / per_frame;
        let mut ch = [vec![0.0; t], vec![0.0; t], vec![0.0; t]];
        for (i, frame) in frames.chunks_exact(per_frame).enumerate() {
            let mut acc = [0.0f64; 3];
            for px in frame.chunks_exact(3) {
                for c in 0..3 {
                    acc[c] += px[c] as f64;
                }
            }
            for c in 0..3 {
                ch[c][i] = acc[c] / pixels_per_frame as f64;
            }
        }
        let [r, g, b] = ch;
        Self::new(r, g, b, fs)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn channels(&self) -> [&[f64]; 3] {
        [&self.r, &self.g, &self.b]
    }
}

/// Removes the least-squares line.
fn linear_detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let xm = mean(x);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - tm;
        sxy += dt * (v - xm);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, v)| v - xm - slope * (i as f64 - tm))
        .collect()
}

/// Green channel, linearly detrended and mean-removed.
pub fn green(trace: &RgbTrace) -> Result<Vec<f64>> {
    if trace.len() < 2 {
        return Err(Error::TooShort(format!("{} samples", trace.len())));
    }
    Ok(linear_detrend(&trace.g))
}

fn window_len(trace: &RgbTrace, win_seconds: f64) -> Result<usize> {
    let l = (win_seconds * trace.fs).round() as usize;
    if l < 2 {
        return Err(Error::InvalidArgument(format!(
            "{win_seconds} s window is shorter than 2 samples"
        )));
    }
    if trace.len() < l {
        return Err(Error::TooShort(format!(
            "{} samples, window needs {l}",
            trace.len()
        )));
    }
    let positive = trace
        .channels()
        .iter()
        .all(|c| c.iter().all(|&v| v > 0.0 && v.is_finite()));
    if !positive {
        return Err(Error::InvalidArgument(
            "chrominance methods need strictly positive channel values".into(),
        ));
    }
    Ok(l)
}

/// Window starts covering `[0, n)` with the given step; the last window is
/// aligned to the end.
fn window_positions(n: usize, l: usize, step: usize) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..=(n - l) / step).map(|i| i * step).collect();
    if *starts.last().unwrap() + l < n {
        starts.push(n - l);
    }
    starts
}

fn normalized(c: &[f64]) -> Vec<f64> {
    let m = mean(c);
    c.iter().map(|v| v / m).collect()
}

/// CHROM: chrominance projection per 1.6 s window, Hann overlap-added.
pub fn chrom(trace: &RgbTrace, win_seconds: f64) -> Result<Vec<f64>> {
    let l = window_len(trace, win_seconds)?;
    let n = trace.len();
    let step = (l / 2).max(1);
    let hann: Vec<f64> = (0..l)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / l as f64).cos())
        .collect();
    let mut out = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for s in window_positions(n, l, step) {
        let rn = normalized(&trace.r[s..s + l]);
        let gn = normalized(&trace.g[s..s + l]);
        let bn = normalized(&trace.b[s..s + l]);
        let x: Vec<f64> = (0..l).map(|i| 3.0 * rn[i] - 2.0 * gn[i]).collect();
        let y: Vec<f64> = (0..l).map(|i| 1.5 * rn[i] + gn[i] - 1.5 * bn[i]).collect();
        let (_, sx) = mean_std(&x);
        let (_, sy) = mean_std(&y);
        for i in 0..l {
            weight[s + i] += hann[i];
        }
        if sy <= 0.0 {
            continue;
        }
        let alpha = sx / sy;
        let sig: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - alpha * b).collect();
        let m = mean(&sig);
        for i in 0..l {
            out[s + i] += (sig[i] - m) * hann[i];
        }
    }
    // Windows overlap unevenly at the tail; normalise the OLA gain.
    for (o, w) in out.iter_mut().zip(&weight) {
        if *w > 1e-12 {
            *o /= w;
        }
    }
    let m = mean(&out);
    Ok(out.into_iter().map(|v| v - m).collect())
}

/// POS: plane-orthogonal-to-skin projection per sliding window, overlap-added.
pub fn pos(trace: &RgbTrace, win_seconds: f64) -> Result<Vec<f64>> {
    let l = window_len(trace, win_seconds)?;
    let n = trace.len();
    let mut out = vec![0.0; n];
    for s in 0..=(n - l) {
        let rn = normalized(&trace.r[s..s + l]);
        let gn = normalized(&trace.g[s..s + l]);
        let bn = normalized(&trace.b[s..s + l]);
        let s1: Vec<f64> = (0..l).map(|i| gn[i] - bn[i]).collect();
        let s2: Vec<f64> = (0..l).map(|i| gn[i] + bn[i] - 2.0 * rn[i]).collect();
        let (_, sd1) = mean_std(&s1);
        let (_, sd2) = mean_std(&s2);
        let alpha = if sd2 > 0.0 { sd1 / sd2 } else { 0.0 };
        let h: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect();
        let m = mean(&h);
        for i in 0..l {
            out[s + i] += h[i] - m;
        }
    }
    let m = mean(&out);
    Ok(out.into_iter().map(|v| v - m).collect())
}

type Mat3 = [[f64; 3]; 3];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix. Eigenvectors
/// are the columns of the returned matrix.
fn sym_eigen(mut a: Mat3) -> ([f64; 3], Mat3) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off < 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            j[p][p] = c;
            j[q][q] = c;
            j[p][q] = s;
            j[q][p] = -s;
            a = matmul(&transpose(&j), &matmul(&a, &j));
            v = matmul(&v, &j);
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// `(W W^T)^{-1/2} W`
fn symmetric_decorrelate(w: &Mat3) -> Mat3 {
    let (vals, vecs) = sym_eigen(matmul(w, &transpose(w)));
    let mut d = [[0.0; 3]; 3];
    for i in 0..3 {
        d[i][i] = 1.0 / vals[i].max(1e-300).sqrt();
    }
    let inv_sqrt = matmul(&vecs, &matmul(&d, &transpose(&vecs)));
    matmul(&inv_sqrt, w)
}

/// Output of [`ica_pulse`].
#[derive(Debug, Clone, PartialEq)]
pub struct IcaResult {
    pub pulse: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the selected independent component.
    pub component: usize,
}

/// Largest in-band periodogram bin divided by total non-DC power, plus that
/// bin's index.
fn in_band_peak(x: &[f64], fs: f64) -> Result<(f64, usize)> {
    let spec = rfft(x)?;
    let df = fs / x.len() as f64;
    let mut total = 0.0;
    let mut best = (0.0, 0);
    for k in 1..spec.len() {
        let p = spec.re[k] * spec.re[k] + spec.im[k] * spec.im[k];
        total += p;
        let f = k as f64 * df;
        if (HR_BAND_LO..=HR_BAND_HI).contains(&f) && p > best.0 {
            best = (p, k);
        }
    }
    Ok((if total > 0.0 { best.0 / total } else { 0.0 }, best.1))
}

/// Symmetric FastICA (tanh contrast) on the centred, whitened trace. Returns
/// the component with the strongest in-band spectral peak, sign-aligned to
/// the green channel at that peak.
pub fn ica_pulse(trace: &RgbTrace) -> Result<IcaResult> {
    let n = trace.len();
    if n < 10 {
        return Err(Error::TooShort(format!("{n} samples")));
    }
    let centered: Vec<Vec<f64>> = trace
        .channels()
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64;
        }
    }
    let (vals, vecs) = sym_eigen(cov);
    let vmax = vals.iter().cloned().fold(0.0, f64::max);
    if vmax <= 0.0 || vals.iter().any(|&v| v <= 1e-12 * vmax) {
        return Err(Error::Degenerate(format!(
            "rank-deficient channel covariance (eigenvalues {vals:?})"
        )));
    }
    // whitening matrix rows: e_i^T / sqrt(lambda_i)
    let mut whiten = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            whiten[i][j] = vecs[j][i] / vals[i].sqrt();
        }
    }
    let z: Vec<[f64; 3]> = (0..n)
        .map(|t| {
            let x = [centered[0][t], centered[1][t], centered[2][t]];
            let mut o = [0.0; 3];
            for i in 0..3 {
                o[i] = (0..3).map(|j| whiten[i][j] * x[j]).sum();
            }
            o
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(ICA_SEED);
    let mut w = [[0.0; 3]; 3];
    for row in w.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
    }
    w = symmetric_decorrelate(&w);

    let mut converged = false;
    let mut iterations = 0;
    while iterations < ICA_MAX_ITER {
        iterations += 1;
        let mut next = [[0.0; 3]; 3];
        let mut gprime = [0.0; 3];
        for zt in &z {
            for i in 0..3 {
                let u: f64 = (0..3).map(|j| w[i][j] * zt[j]).sum();
                let g = u.tanh();
                gprime[i] += 1.0 - g * g;
                for j in 0..3 {
                    next[i][j] += g * zt[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                next[i][j] = next[i][j] / n as f64 - gprime[i] / n as f64 * w[i][j];
            }
        }
        let next = symmetric_decorrelate(&next);
        let change = (0..3)
            .map(|i| {
                let d: f64 = (0..3).map(|j| next[i][j] * w[i][j]).sum();
                (d.abs() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        w = next;
        if change < ICA_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("ICA did not converge in {ICA_MAX_ITER} iterations; using last iterate");
    }

    let sources: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            z.iter()
                .map(|zt| (0..3).map(|j| w[i][j] * zt[j]).sum())
                .collect()
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (i, s) in sources.iter().enumerate() {
        let (ratio, bin) = in_band_peak(s, trace.fs)?;
        if ratio > best.0 {
            best = (ratio, i, bin);
        }
    }
    let (_, component, bin) = best;
    let mut pulse = sources[component].clone();
    let sp = rfft(&pulse)?;
    let gp = rfft(&centered[1])?;
    let alignment = sp.re[bin] * gp.re[bin] + sp.im[bin] * gp.im[bin];
    if alignment < 0.0 {
        pulse.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(IcaResult {
        pulse,
        converged,
        iterations,
        component,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flicker_trace() -> RgbTrace {
        let c: Vec<f64> = (0..300)
            .map(|i| 100.0 * (1.0 + 0.05 * (2.0 * PI * 1.3 * i as f64 / 30.0).sin()))
            .collect();
        RgbTrace::new(c.clone(), c.clone(), c, 30.0).unwrap()
    }

    #[test]
    fn achromatic_flicker_cancels() {
        let t = flicker_trace();
        for out in [
            chrom(&t, DEFAULT_WINDOW_S).unwrap(),
            pos(&t, DEFAULT_WINDOW_S).unwrap(),
        ] {
            assert!(
                out.iter().all(|v| v.abs() < 1e-12),
                "max {:?}",
                out.iter().cloned().fold(0.0, f64::max)
            );
        }
    }

    #[test]
    fn constant_trace_gives_zero_pulse() {
        let t = RgbTrace::new(vec![90.0; 200], vec![120.0; 200], vec![80.0; 200], 30.0).unwrap();
        assert!(green(&t).unwrap().iter().all(|v| v.abs() < 1e-9));
        assert!(chrom(&t, DEFAULT_WINDOW_S)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!(pos(&t, DEFAULT_WINDOW_S)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn non_positive_values_rejected() {
        let t = RgbTrace::new(vec![0.0; 100], vec![1.0; 100], vec![1.0; 100], 30.0).unwrap();
        assert!(pos(&t, DEFAULT_WINDOW_S).is_err());
    }

    #[test]
    fn eigen_of_diagonal_and_rotated() {
        let (vals, _) = sym_eigen([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        let mut v = vals.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[2] - 3.0).abs() < 1e-12);
        let a = [[2.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let (vals, vecs) = sym_eigen(a);
        for k in 0..3 {
            let col = [vecs[0][k], vecs[1][k], vecs[2][k]];
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i][j] * col[j]).sum();
                assert!((av - vals[k] * col[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficient_ica_is_degenerate() {
        let g: Vec<f64> = (0..300).map(|i| (i as f64 * 0.3).sin()).collect();
        let t = RgbTrace::new(g.clone(), g.clone(), g, 30.0).unwrap();
        assert!(matches!(ica_pulse(&t), Err(Error::Degenerate(_))));
    }
}
