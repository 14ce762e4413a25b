//! Face-box smoothing, area-average downsampling, window extraction and
//! input normalization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clipio::ClipContainer;
use crate::error::{Error, Result};
use crate::numerics::{mean_std, Tensor};

/// Model input side length.
pub const MODEL_SIDE: usize = 8;
/// Frames per model window.
pub const WINDOW_FRAMES: usize = 450;
pub const DEFAULT_BOX_ALPHA: f64 = 0.3;

/// Axis-aligned box in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn full_frame(width: usize, height: usize) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            w: width as f64,
            h: height as f64,
        }
    }

    fn coords(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    fn from_coords(c: [f64; 4]) -> Self {
        Self {
            x: c[0],
            y: c[1],
            w: c[2],
            h: c[3],
        }
    }

    /// Shrinks/moves the box so it lies inside a `width x height` frame.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let (fw, fh) = (width as f64, height as f64);
        let x0 = self.x.clamp(0.0, fw - 1.0);
        let y0 = self.y.clamp(0.0, fh - 1.0);
        let x1 = (self.x + self.w).clamp(x0 + 1.0, fw);
        let y1 = (self.y + self.h).clamp(y0 + 1.0, fh);
        Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

/// Per-frame face boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxTrack(pub Vec<BoundingBox>);

impl BoxTrack {
    /// Reads a JSON sidecar: an array of `[x, y, w, h]`, one per frame.
    pub fn from_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let raw: Vec<[f64; 4]> = serde_json::from_slice(&std::fs::read(path)?)?;
        let track = Self(raw.into_iter().map(BoundingBox::from_coords).collect());
        if let Some(i) = track.0.iter().position(|b| !(b.w > 0.0 && b.h > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "box {i} has non-positive size"
            )));
        }
        Ok(track)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Exponential moving average over every box coordinate.
pub fn smooth_boxes(raw: &BoxTrack, alpha: f64) -> Result<BoxTrack> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }
    let Some(first) = raw.0.first() else {
        return Err(Error::Empty("box track has no frames".into()));
    };
    let mut state = first.coords();
    let mut out = Vec::with_capacity(raw.len());
    out.push(*first);
    for b in &raw.0[1..] {
        let c = b.coords();
        for k in 0..4 {
            state[k] = alpha * c[k] + (1.0 - alpha) * state[k];
        }
        out.push(BoundingBox::from_coords(state));
    }
    Ok(BoxTrack(out))
}

/// Coverage of source cells `[0, n)` by the interval `[lo, hi)`, as a dense
/// weight row.
fn coverage(lo: f64, hi: f64, n: usize) -> (usize, Vec<f64>) {
    let first = lo.floor().max(0.0) as usize;
    let last = (hi.ceil() as usize).min(n);
    let w = (first..last)
        .map(|s| {
            let a = (s as f64).max(lo);
            let b = ((s + 1) as f64).min(hi);
            (b - a).max(0.0)
        })
        .collect();
    (first, w)
}

/// Area-average resample of the `region` of an `h x w x channels` image.
///
/// Each output pixel is the coverage-weighted mean of the source pixels that
/// overlap its footprint in the region.
pub fn area_resize_region(
    img: &[f32],
    h: usize,
    w: usize,
    channels: usize,
    region: BoundingBox,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<f32>> {
    if img.len() != h * w * channels {
        return Err(Error::Shape(format!(
            "image buffer of {} values is not {h}x{w}x{channels}",
            img.len()
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("output size must be >= 1".into()));
    }
    if region.h < out_h as f64 || region.w < out_w as f64 {
        return Err(Error::UnsupportedDirection(format!(
            "{}x{} region cannot be downsampled to {out_h}x{out_w}",
            region.h, region.w
        )));
    }
    let rows: Vec<_> = (0..out_h)
        .map(|i| {
            let step = region.h / out_h as f64;
            coverage(
                region.y + i as f64 * step,
                region.y + (i + 1) as f64 * step,
                h,
            )
        })
        .collect();
    let cols: Vec<_> = (0..out_w)
        .map(|j| {
            let step = region.w / out_w as f64;
            coverage(
                region.x + j as f64 * step,
                region.x + (j + 1) as f64 * step,
                w,
            )
        })
        .collect();

    let mut out = vec![0f32; out_h * out_w * channels];
    let mut acc = vec![0f64; channels];
    for (i, (r0, rw)) in rows.iter().enumerate() {
        for (j, (c0, cw)) in cols.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut area = 0.0;
            for (di, &wr) in rw.iter().enumerate() {
                for (dj, &wc) in cw.iter().enumerate() {
                    let wt = wr * wc;
                    if wt == 0.0 {
                        continue;
                    }
                    area += wt;
                    let base = ((r0 + di) * w + (c0 + dj)) * channels;
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += wt * img[base + c] as f64;
                    }
                }
            }
            let base = (i * out_w + j) * channels;
            for c in 0..channels {
                out[base + c] = (acc[c] / area) as f32;
            }
        }
    }
    Ok(out)
}

/// Area-average downsampling of a whole `h x w x channels` image.
pub fn area_resize(
    img: &[f32],
    h: usize,
    w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<f32>> {
    if out_h > h || out_w > w {
        return Err(Error::UnsupportedDirection(format!(
            "{h}x{w} -> {out_h}x{out_w} is an upsample"
        )));
    }
    area_resize_region(
        img,
        h,
        w,
        channels,
        BoundingBox::full_frame(w, h),
        out_h,
        out_w,
    )
}

/// Crops every frame of `clip` to its (optionally smoothed) face box and
/// area-resamples it to `side x side`. Returns `T x side x side x 3` values in
/// the 0..=255 pixel range.
pub fn prepare_frames(
    clip: &ClipContainer,
    boxes: Option<&BoxTrack>,
    box_alpha: f64,
    side: usize,
) -> Result<Vec<f32>> {
    let (h, w) = (clip.height as usize, clip.width as usize);
    let t = clip.frame_count();
    let smoothed = match boxes {
        Some(track) => {
            if track.len() != t {
                return Err(Error::InvalidLength(format!(
                    "{} boxes for {t} frames",
                    track.len()
                )));
            }
            Some(smooth_boxes(track, box_alpha)?)
        }
        None => None,
    };
    let mut out = Vec::with_capacity(t * side * side * 3);
    let mut frame = vec![0f32; h * w * 3];
    for i in 0..t {
        for (dst, &src) in frame.iter_mut().zip(clip.frame(i)) {
            *dst = src as f32;
        }
        let region = match &smoothed {
            Some(track) => track.0[i].clamped(w, h),
            None => BoundingBox::full_frame(w, h),
        };
        out.extend(area_resize_region(&frame, h, w, 3, region, side, side)?);
    }
    Ok(out)
}

/// How raw pixel windows are turned into model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNormalization {
    /// `x / 255` minus each pixel-channel's temporal mean.
    #[default]
    MeanRemoved,
    /// `x / 255` only.
    ScaleOnly,
}

/// One model input window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTensor {
    /// `frames x side x side x 3`.
    pub x: Tensor<f32>,
    /// Standardized BVP label, one per frame.
    pub y: Vec<f32>,
    /// Start frame within the clip.
    pub t0: usize,
}

/// Normalizes one raw window. `raw_x` is `frames x side x side x 3` in pixel
/// units, `raw_y` one label per frame.
pub fn normalize_window(
    raw_x: &[f32],
    raw_y: &[f64],
    side: usize,
    mode: InputNormalization,
) -> Result<WindowTensor> {
    let frames = raw_y.len();
    let per_frame = side * side * 3;
    if frames == 0 || raw_x.len() != frames * per_frame {
        return Err(Error::Shape(format!(
            "window of {} values does not match {frames} frames of {side}x{side}x3",
            raw_x.len()
        )));
    }
    let (m, s) = mean_std(raw_y);
    if !(s > 1e-9 * m.abs().max(1.0)) || !s.is_finite() {
        return Err(Error::Degenerate("label window has zero variance".into()));
    }
    let y: Vec<f32> = raw_y.iter().map(|v| ((v - m) / s) as f32).collect();

    let x = normalize_frames(raw_x, frames, side, mode)?;
    Ok(WindowTensor { x, y, t0: 0 })
}

/// Input half of [`normalize_window`]: scales `frames x side x side x 3`
/// pixel values by 1/255 and, for [`InputNormalization::MeanRemoved`],
/// subtracts each pixel-channel's temporal mean.
pub fn normalize_frames(
    raw_x: &[f32],
    frames: usize,
    side: usize,
    mode: InputNormalization,
) -> Result<Tensor<f32>> {
    let per_frame = side * side * 3;
    if frames == 0 || raw_x.len() != frames * per_frame {
        return Err(Error::Shape(format!(
            "{} values do not form {frames} frames of {side}x{side}x3",
            raw_x.len()
        )));
    }
    let mut x: Vec<f32> = raw_x.iter().map(|&v| v / 255.0).collect();
    if mode == InputNormalization::MeanRemoved {
        for k in 0..per_frame {
            let mean = (0..frames)
                .map(|t| x[t * per_frame + k] as f64)
                .sum::<f64>()
                / frames as f64;
            for t in 0..frames {
                x[t * per_frame + k] -= mean as f32;
            }
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite input values".into()));
    }
    Tensor::new(vec![frames, side, side, 3], x)
}

/// Window start frames: `0, stride, 2*stride, ...` while the window fits.
pub fn window_starts(total: usize, win: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 || win == 0 {
        return Err(Error::InvalidArgument(
            "window and stride must be >= 1".into(),
        ));
    }
    if total < win {
        return Err(Error::TooShort(format!(
            "{total} frames, window needs {win}"
        )));
    }
    Ok((0..=(total - win) / stride).map(|i| i * stride).collect())
}

/// Cuts `frames` (`T x side x side x 3`) and `labels` (`T`) into normalized
/// windows. Windows whose label has zero variance are skipped.
pub fn make_windows(
    frames: &[f32],
    labels: &[f64],
    side: usize,
    win: usize,
    stride: usize,
    mode: InputNormalization,
) -> Result<Vec<WindowTensor>> {
    let per_frame = side * side * 3;
    let total = labels.len();
    if frames.len() != total * per_frame {
        return Err(Error::Shape(format!(
            "{} frame values for {total} labels",
            frames.len()
        )));
    }
    let mut out = Vec::new();
    for t0 in window_starts(total, win, stride)? {
        let xs = &frames[t0 * per_frame..(t0 + win) * per_frame];
        match normalize_window(xs, &labels[t0..t0 + win], side, mode) {
            Ok(mut w) => {
                w.t0 = t0;
                out.push(w);
            }
            Err(Error::Degenerate(msg)) => {
                log::debug!("skipping window at frame {t0}: {msg}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
