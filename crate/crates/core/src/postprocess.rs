//! Signal conditioning and physiological readouts.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{irfft, mean, mean_std, rfft};

/// Lower edge of the heart-rate band, Hz (40 bpm).
pub const HR_BAND_LO: f64 = 0.66;
/// Upper edge of the heart-rate band, Hz (180 bpm).
pub const HR_BAND_HI: f64 = 3.0;

const WELCH_SEGMENT_S: f64 = 10.0;
/// Zero-padded segment length at 30 Hz; scaled up for faster sample rates so
/// the bin width stays at or below 30/16384 Hz.
const WELCH_NFFT_AT_30HZ: usize = 16384;
const LOW_CONFIDENCE_RATIO: f64 = 3.0;
const RMS_WINDOW_S: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl PulseSignal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be > 0, got {fs}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::TooShort(format!("{} samples", samples.len())));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            samples: self.samples[start..end].to_vec(),
            fs: self.fs,
        }
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            fs: self.fs,
        }
    }
}

/// Subtracts a centered moving average of `window_seconds` (rounded to an odd
/// sample count); edge windows are truncated.
pub fn detrend(sig: &PulseSignal, window_seconds: f64) -> Result<PulseSignal> {
    let half = (sig.fs * window_seconds / 2.0).floor() as usize;
    if half == 0 {
        return Err(Error::InvalidArgument(format!(
            "{window_seconds} s at {} Hz is shorter than 2 samples",
            sig.fs
        )));
    }
    let x = &sig.samples;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            x[i] - (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    Ok(sig.with_samples(out))
}

/// Zero-phase band-pass: keeps only FFT bins with `lo <= f <= hi`.
pub fn bandpass(sig: &PulseSignal, lo: f64, hi: f64) -> Result<PulseSignal> {
    if !(lo < hi && hi < sig.fs / 2.0) {
        return Err(Error::Band(format!(
            "need lo < hi < fs/2, got {lo}..{hi} at {} Hz",
            sig.fs
        )));
    }
    let n = sig.len();
    let mut spec = rfft(&sig.samples)?;
    let df = sig.fs / n as f64;
    let mut kept = 0;
    for k in 0..spec.len() {
        let f = k as f64 * df;
        if f < lo || f > hi {
            spec.re[k] = 0.0;
            spec.im[k] = 0.0;
        } else {
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::Band(format!(
            "no bin of width {df:.4} Hz falls inside {lo}..{hi} Hz"
        )));
    }
    Ok(sig.with_samples(irfft(&spec, n)?))
}

/// Heart rate band-pass with the default edges.
pub fn bandpass_hr(sig: &PulseSignal) -> Result<PulseSignal> {
    bandpass(sig, HR_BAND_LO, HR_BAND_HI)
}

/// Welch power spectral density.
#[derive(Debug, Clone)]
pub struct WelchPsd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: usize,
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Averaged periodogram over 10 s Hann segments with 50% overlap, each
/// zero-padded to a power of two (16384 at 30 Hz).
pub fn welch_psd(sig: &PulseSignal) -> Result<WelchPsd> {
    let seg = (WELCH_SEGMENT_S * sig.fs).round() as usize;
    if sig.len() < seg || seg < 2 {
        return Err(Error::Duration(format!(
            "{:.2} s signal, Welch needs {WELCH_SEGMENT_S} s",
            sig.duration()
        )));
    }
    let nfft = ((sig.fs * WELCH_NFFT_AT_30HZ as f64 / 30.0).ceil() as usize)
        .next_power_of_two()
        .max(seg.next_power_of_two());
    let step = (seg / 2).max(1);
    let window = periodic_hann(seg);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let bins = nfft / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut segments = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + seg <= sig.len() {
        let chunk = &sig.samples[start..start + seg];
        let m = mean(chunk);
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (&v, &w)) in chunk.iter().zip(&window).enumerate() {
            buf[i].re = (v - m) * w;
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (sig.fs * win_energy * segments as f64);
    for (k, p) in power.iter_mut().enumerate() {
        *p *= scale;
        if k != 0 && !(nfft.is_multiple_of(2) && k == nfft / 2) {
            *p *= 2.0;
        }
    }
    let freqs = (0..bins).map(|k| k as f64 * sig.fs / nfft as f64).collect();
    Ok(WelchPsd {
        freqs,
        power,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrEstimate {
    pub bpm: f64,
    /// Peak power over the median in-band power.
    pub peak_ratio: f64,
    pub low_confidence: bool,
}

/// Heart rate from the Welch PSD peak inside 0.66..3 Hz.
pub fn welch_hr(sig: &PulseSignal) -> Result<HrEstimate> {
    let psd = welch_psd(sig)?;
    let band: Vec<(f64, f64)> = psd
        .freqs
        .iter()
        .zip(&psd.power)
        .filter(|(&f, _)| (HR_BAND_LO..=HR_BAND_HI).contains(&f))
        .map(|(&f, &p)| (f, p))
        .collect();
    if band.is_empty() {
        return Err(Error::Band("no PSD bins in the heart-rate band".into()));
    }
    let (f_peak, p_peak) =
        band.iter()
            .copied()
            .fold((band[0].0, f64::NEG_INFINITY), |best, (f, p)| {
                if p > best.1 {
                    (f, p)
                } else {
                    best
                }
            });
    let mut powers: Vec<f64> = band.iter().map(|b| b.1).collect();
    powers.sort_by(|a, b| a.total_cmp(b));
    let median = powers[powers.len() / 2];
    let peak_ratio = if median > 0.0 {
        p_peak / median
    } else if p_peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(HrEstimate {
        bpm: f_peak * 60.0,
        peak_ratio,
        low_confidence: peak_ratio < LOW_CONFIDENCE_RATIO,
    })
}

/// Minimum peak spacing as a fraction of the mean beat period.
const MIN_PEAK_GAP: f64 = 0.6;

/// Local maxima above half the rolling RMS, at least `0.6 * 60 / HR` seconds
/// apart, where HR is the Welch estimate (180 bpm when the signal is too short
/// for Welch). The loose spacing admits irregular rhythms. Plateaus report
/// their middle sample.
pub fn detect_peaks(sig: &PulseSignal) -> Vec<usize> {
    let x = &sig.samples;
    let n = x.len();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n < 3 || scale == 0.0 {
        return Vec::new();
    }
    let tol = 1e-12 * scale;
    let same = |a: f64, b: f64| (a - b).abs() <= tol;

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let half = ((RMS_WINDOW_S * sig.fs / 2.0).round() as usize).max(1);
    let rms = |i: usize| {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).sqrt()
    };

    let mut candidates = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if x[i] > x[i - 1] && !same(x[i], x[i - 1]) {
            let mut j = i;
            while j + 1 < n && same(x[j + 1], x[i]) {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let mid = i + (j - i) / 2;
                if x[mid] > 0.5 * rms(mid) {
                    candidates.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    if candidates.is_empty() {
        return candidates;
    }

    let hr = welch_hr(sig).map(|e| e.bpm).unwrap_or(180.0);
    let min_dist = MIN_PEAK_GAP * 60.0 / hr * sig.fs;
    let mut by_height = candidates.clone();
    by_height.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in by_height {
        if kept
            .iter()
            .all(|&k| (k as f64 - c as f64).abs() >= min_dist)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Population standard deviation of inter-beat intervals, in milliseconds.
pub fn sdnn(peaks: &[usize], fs: f64) -> Result<f64> {
    if peaks.len() < 3 {
        return Err(Error::InsufficientPeaks(format!(
            "{} peaks, SDNN needs at least 3",
            peaks.len()
        )));
    }
    let intervals: Vec<f64> = peaks
        .windows(2)
        .map(|w| (w[1] as f64 - w[0] as f64) / fs * 1000.0)
        .collect();
    Ok(mean_std(&intervals).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, fs: f64, secs: f64) -> PulseSignal {
        let n = (fs * secs).round() as usize;
        PulseSignal::new(
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
                .collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn detrend_constant_and_ramp() {
        let c = PulseSignal::new(vec![5.0; 100], 30.0).unwrap();
        assert!(detrend(&c, 1.0)
            .unwrap()
            .samples
            .iter()
            .all(|v| v.abs() < 1e-12));
        let ramp = PulseSignal::new((0..100).map(|i| 0.3 * i as f64).collect(), 30.0).unwrap();
        let d = detrend(&ramp, 1.0).unwrap();
        for v in &d.samples[15..85] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn detrend_needs_two_samples() {
        let c = PulseSignal::new(vec![1.0; 10], 1.0).unwrap();
        assert!(detrend(&c, 1.0).is_err());
    }

    #[test]
    fn bandpass_keeps_in_band_tone() {
        let s = sine(1.2, 30.0, 30.0);
        let out = bandpass_hr(&s).unwrap();
        for (a, b) in s.samples.iter().zip(&out.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn bandpass_zeros_dc() {
        let s = PulseSignal::new(vec![3.0; 300], 30.0).unwrap();
        assert!(bandpass_hr(&s)
            .unwrap()
            .samples
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bandpass_band_errors() {
        let s = sine(1.0, 30.0, 1.0);
        assert!(matches!(bandpass(&s, 3.0, 2.0), Err(Error::Band(_))));
        assert!(matches!(bandpass(&s, 1.0, 16.0), Err(Error::Band(_))));
        // 1 Hz bins: nothing between 1.2 and 1.8 Hz
        assert!(matches!(bandpass(&s, 1.2, 1.8), Err(Error::Band(_))));
    }

    #[test]
    fn welch_recovers_sinusoid_rates() {
        for (f, bpm) in [(1.2, 72.0), (0.75, 45.0)] {
            let e = welch_hr(&sine(f, 30.0, 30.0)).unwrap();
            assert!((e.bpm - bpm).abs() < 0.2, "{} vs {bpm}", e.bpm);
            assert!(!e.low_confidence);
        }
    }

    #[test]
    fn welch_rejects_short_signal() {
        assert!(matches!(
            welch_hr(&sine(1.0, 30.0, 9.0)),
            Err(Error::Duration(_))
        ));
    }

    #[test]
    fn one_hertz_peaks() {
        let p = detect_peaks(&sine(1.0, 30.0, 10.0));
        assert_eq!(p.len(), 10);
        assert!(p.windows(2).all(|w| w[1] - w[0] == 30), "{p:?}");
    }

    #[test]
    fn zeros_have_no_peaks() {
        assert!(detect_peaks(&PulseSignal::new(vec![0.0; 300], 30.0).unwrap()).is_empty());
    }

    #[test]
    fn sdnn_values() {
        assert_eq!(sdnn(&[0, 30, 60, 90], 30.0).unwrap(), 0.0);
        // intervals 800, 1000, 800, 1000 ms at 1 kHz
        assert!((sdnn(&[0, 800, 1800, 2600, 3600], 1000.0).unwrap() - 100.0).abs() < 1e-9);
        assert!(matches!(
            sdnn(&[0, 10], 30.0),
            Err(Error::InsufficientPeaks(_))
        ));
        let a = sdnn(&[0, 24, 54, 78, 108], 30.0).unwrap();
        let b = sdnn(&[0, 48, 108, 156, 216], 60.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
