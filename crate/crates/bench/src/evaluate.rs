//! Moving-window HR evaluation and error metrics.

use pulsebench_core::numerics::pearson;
use pulsebench_core::postprocess::{bandpass_hr, detect_peaks, sdnn, welch_hr, PulseSignal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HR_MIN: f64 = 40.0;
pub const HR_MAX: f64 = 180.0;
pub const DEFAULT_WINDOW_S: f64 = 30.0;
pub const DEFAULT_STRIDE_S: f64 = 10.0;

pub const FLAG_SHORT_WINDOW: &str = "short_window";
pub const FLAG_PRED_CLAMPED: &str = "pred_clamped";
pub const FLAG_GT_CLAMPED: &str = "gt_clamped";
pub const FLAG_PRED_LOW_CONFIDENCE: &str = "pred_low_confidence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedEstimate {
    pub clip: String,
    pub start: f64,
    pub end: f64,
    pub hr_pred: f64,
    pub hr_gt: f64,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdnn_pred: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdnn_gt: Option<f64>,
}

fn clamp_hr(bpm: f64, flag: &str, flags: &mut Vec<String>) -> f64 {
    if (HR_MIN..=HR_MAX).contains(&bpm) {
        bpm
    } else {
        flags.push(flag.to_string());
        bpm.clamp(HR_MIN, HR_MAX)
    }
}

/// SDNN of a bandpassed window, or `None` when too few beats are found.
pub fn window_sdnn(sig: &PulseSignal) -> Option<f64> {
    let filtered = bandpass_hr(sig).ok()?;
    sdnn(&detect_peaks(&filtered), sig.fs).ok()
}

/// Welch HR of `pred` and `gt` over `window_s` windows every `stride_s`.
/// A signal shorter than one window yields a single flagged window over its
/// whole length. `clip` is left empty for the caller to fill.
pub fn windowed_hr(
    pred: &PulseSignal,
    gt: &PulseSignal,
    window_s: f64,
    stride_s: f64,
) -> Result<Vec<WindowedEstimate>> {
    if pred.fs != gt.fs || pred.len() != gt.len() {
        return Err(Error::Config(format!(
            "prediction ({} samples at {} Hz) and ground truth ({} at {} Hz) differ",
            pred.len(),
            pred.fs,
            gt.len(),
            gt.fs
        )));
    }
    if !(window_s > 0.0) || !(stride_s > 0.0) {
        return Err(Error::Config("window and stride must be positive".into()));
    }
    let fs = pred.fs;
    let win = (window_s * fs).round() as usize;
    let stride = ((stride_s * fs).round() as usize).max(1);
    let n = pred.len();
    let (spans, short) = if n < win {
        (vec![(0, n)], true)
    } else {
        (
            (0..=(n - win) / stride)
                .map(|i| (i * stride, i * stride + win))
                .collect(),
            false,
        )
    };
    let mut out = Vec::with_capacity(spans.len());
    for (a, b) in spans {
        let (p, g) = (pred.slice(a, b), gt.slice(a, b));
        let hp = welch_hr(&p)?;
        let hg = welch_hr(&g)?;
        let mut flags = Vec::new();
        if short {
            flags.push(FLAG_SHORT_WINDOW.to_string());
        }
        if hp.low_confidence {
            flags.push(FLAG_PRED_LOW_CONFIDENCE.to_string());
        }
        let hr_pred = clamp_hr(hp.bpm, FLAG_PRED_CLAMPED, &mut flags);
        let hr_gt = clamp_hr(hg.bpm, FLAG_GT_CLAMPED, &mut flags);
        let start = a as f64 / fs;
        out.push(WindowedEstimate {
            clip: String::new(),
            start,
            end: start + (b - a) as f64 / fs,
            hr_pred,
            hr_gt,
            flags,
            sdnn_pred: window_sdnn(&p),
            sdnn_gt: window_sdnn(&g),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either list has zero variance or fewer than two pairs.
    pub pearson: Option<f64>,
}

/// MAE, RMSE and Pearson correlation over `(pred, gt)` pairs.
pub fn hr_metrics(pairs: &[(f64, f64)]) -> Result<HrMetrics> {
    if pairs.is_empty() {
        return Err(pulsebench_core::Error::Empty("no HR pairs".into()).into());
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let rmse = (pairs.iter().map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / n).sqrt();
    let (p, g): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(HrMetrics {
        mae,
        rmse,
        pearson: pearson(&p, &g).ok(),
    })
}

/// Mean absolute SDNN error over windows where both sides have an SDNN.
pub fn sdnn_mae(windows: &[WindowedEstimate]) -> Option<f64> {
    let errs: Vec<f64> = windows
        .iter()
        .filter_map(|w| Some((w.sdnn_pred? - w.sdnn_gt?).abs()))
        .collect();
    if errs.is_empty() {
        None
    } else {
        Some(errs.iter().sum::<f64>() / errs.len() as f64)
    }
}
