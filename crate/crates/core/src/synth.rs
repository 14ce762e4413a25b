//! Synthetic ground-truth clips from a dichromatic skin-reflection model.
//!
//! Each pixel is `base + texture + diffuse_gain * skin[c] * s(t)` plus
//! achromatic drift and specular terms, Gaussian sensor noise, optional
//! circular motion of the texture, an optional temporal box filter standing
//! in for inter-frame compression, and finally u8 quantization.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clipio::{write_clip, ClipContainer};
use crate::error::{Error, Result};
use crate::postprocess::PulseSignal;

/// 2023-11-14T22:13:20Z; synthetic clips start on a realistic UNIX epoch.
pub const DEFAULT_EPOCH: f64 = 1_700_000_000.0;
const DRIFT_HZ: f64 = 0.05;
const SPECULAR_TAU_S: f64 = 5.0;

/// Piecewise-linear heart rate over time: `(seconds, bpm)` knots with
/// non-decreasing times. Constant extrapolation outside the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HrTrace(pub Vec<(f64, f64)>);

impl HrTrace {
    pub fn constant(bpm: f64) -> Self {
        Self(vec![(0.0, bpm)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Empty("heart-rate trace has no knots".into()));
        }
        if self.0.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Ordering("heart-rate knots".into()));
        }
        if let Some(&(t, bpm)) = self.0.iter().find(|k| !(40.0..=180.0).contains(&k.1)) {
            return Err(Error::InvalidArgument(format!(
                "heart rate {bpm} bpm at {t} s outside 40..180"
            )));
        }
        Ok(())
    }

    pub fn bpm_at(&self, t: f64) -> f64 {
        let k = &self.0;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, b0), (t1, b1)) = (w[0], w[1]);
            if t <= t1 {
                if t1 == t0 {
                    return b1;
                }
                return b0 + (b1 - b0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    /// Pulse phase `2 pi * integral_0^t bpm/60`, exact for the piecewise-linear
    /// rate. Valid for `t >= 0`.
    pub fn phase_at(&self, t: f64) -> f64 {
        let k = &self.0;
        let mut cycles = 0.0;
        let mut prev_t = 0.0;
        let mut prev_b = self.bpm_at(0.0);
        for &(kt, _) in k.iter().filter(|(kt, _)| *kt > 0.0) {
            if kt >= t {
                break;
            }
            // right-limit handles steps (repeated knot times)
            let b_end = self.bpm_at(kt);
            cycles += 0.5 * (prev_b + b_end) * (kt - prev_t) / 60.0;
            prev_t = kt;
            prev_b = self.bpm_at_right(kt);
        }
        cycles += 0.5 * (prev_b + self.bpm_at(t)) * (t - prev_t) / 60.0;
        2.0 * PI * cycles
    }

    fn bpm_at_right(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .find(|k| k.0 == t)
            .map(|k| k.1)
            .unwrap_or_else(|| self.bpm_at(t))
    }
}

/// Two-harmonic pulse waveform for a given phase.
pub fn pulse_shape(phase: f64) -> f64 {
    phase.sin() + 0.5 * (2.0 * phase).sin()
}

/// Ground-truth BVP sampled at `bvp_fs` over `[0, duration)`.
pub fn gen_bvp(hr: &HrTrace, bvp_fs: f64, duration: f64) -> Result<PulseSignal> {
    hr.validate()?;
    let n = (duration * bvp_fs).round() as usize;
    let samples = (0..n)
        .map(|i| pulse_shape(hr.phase_at(i as f64 / bvp_fs)))
        .collect();
    PulseSignal::new(samples, bvp_fs)
}

fn default_skin_vector() -> [f64; 3] {
    let v: [f64; 3] = [0.33, 0.77, 0.53];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub duration: f64,
    pub fps: f64,
    pub height: u16,
    pub width: u16,
    pub hr_trace: HrTrace,
    /// Pulsatile amplitude in pixel units.
    pub diffuse_gain: f64,
    pub skin_vector: [f64; 3],
    pub base_color: [f64; 3],
    /// Amplitude of the fixed zero-mean spatial shading that motion moves.
    pub texture_amp: f64,
    pub noise_std: f64,
    pub drift_amp: f64,
    /// Circular translation amplitude in whole pixels.
    pub motion_amp: f64,
    pub specular_amp: f64,
    /// Temporal box-filter length standing in for codec smoothing; 1 is off.
    pub smooth_k: usize,
    pub bvp_fs: f64,
    /// Shift applied to the stored BVP timestamps, seconds.
    pub offset_s: f64,
    pub t0: f64,
    pub seed: u64,
    pub scenario: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration: 30.0,
            fps: 30.0,
            height: 8,
            width: 8,
            hr_trace: HrTrace::constant(72.0),
            diffuse_gain: 1.0,
            skin_vector: default_skin_vector(),
            base_color: [170.0, 120.0, 95.0],
            texture_amp: 6.0,
            noise_std: 0.0,
            drift_amp: 0.0,
            motion_amp: 0.0,
            specular_amp: 0.0,
            smooth_k: 1,
            bvp_fs: 60.0,
            offset_s: 0.0,
            t0: DEFAULT_EPOCH,
            seed: 0,
            scenario: "clean".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || !(self.bvp_fs > 0.0) {
            return Err(Error::InvalidArgument("fps and bvp_fs must be > 0".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidArgument("duration must be > 0".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("resolution must be >= 1x1".into()));
        }
        if self.smooth_k == 0 {
            return Err(Error::InvalidArgument("smooth_k must be >= 1".into()));
        }
        if self.noise_std < 0.0 || self.motion_amp < 0.0 {
            return Err(Error::InvalidArgument(
                "noise_std and motion_amp must be >= 0".into(),
            ));
        }
        self.hr_trace.validate()
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }
}

/// Renders a clip. Pure function of `cfg` (including its seed).
pub fn render_clip(cfg: &SynthConfig) -> Result<ClipContainer> {
    cfg.validate()?;
    let (h, w) = (cfg.height as usize, cfg.width as usize);
    let t_count = cfg.frame_count();
    if t_count == 0 {
        return Err(Error::InvalidArgument("clip would have no frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // fixed zero-mean shading pattern
    let mut texture: Vec<f64> = (0..h * w)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let tm = texture.iter().sum::<f64>() / texture.len() as f64;
    texture
        .iter_mut()
        .for_each(|v| *v = (*v - tm) * cfg.texture_amp);

    let sway_phase: [f64; 2] = [
        rng.random::<f64>() * 2.0 * PI,
        rng.random::<f64>() * 2.0 * PI,
    ];

    // Ornstein-Uhlenbeck walk, unit stationary variance
    let dt = 1.0 / cfg.fps;
    let decay = 1.0 - dt / SPECULAR_TAU_S;
    let kick = (2.0 * dt / SPECULAR_TAU_S).sqrt();
    let mut specular = Vec::with_capacity(t_count);
    let mut u = 0.0;
    for _ in 0..t_count {
        specular.push(u);
        u = u * decay + kick * rng.sample::<f64, _>(StandardNormal);
    }

    let noise = Normal::new(0.0, cfg.noise_std.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_frame = h * w * 3;
    let mut raw = vec![0f32; t_count * per_frame];
    let mut frame_ts = Vec::with_capacity(t_count);
    for ti in 0..t_count {
        let t = ti as f64 / cfg.fps;
        frame_ts.push(cfg.t0 + t);
        let s = pulse_shape(cfg.hr_trace.phase_at(t));
        let common =
            cfg.drift_amp * (2.0 * PI * DRIFT_HZ * t).sin() + cfg.specular_amp * specular[ti];
        let (dy, dx) = if cfg.motion_amp > 0.0 {
            (
                (cfg.motion_amp * (2.0 * PI * 0.13 * t + sway_phase[0]).sin()).round() as i64,
                (cfg.motion_amp * (2.0 * PI * 0.21 * t + sway_phase[1]).sin()).round() as i64,
            )
        } else {
            (0, 0)
        };
        let frame = &mut raw[ti * per_frame..(ti + 1) * per_frame];
        for i in 0..h {
            for j in 0..w {
                let si = (i as i64 + dy).rem_euclid(h as i64) as usize;
                let sj = (j as i64 + dx).rem_euclid(w as i64) as usize;
                let shade = texture[si * w + sj];
                for c in 0..3 {
                    let eta = if cfg.noise_std > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    let v = cfg.base_color[c]
                        + shade
                        + cfg.diffuse_gain * cfg.skin_vector[c] * s
                        + common
                        + eta;
                    frame[(i * w + j) * 3 + c] = v as f32;
                }
            }
        }
    }

    if cfg.smooth_k > 1 {
        raw = box_filter_time(&raw, t_count, per_frame, cfg.smooth_k);
    }
    let frames = raw
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();

    let bvp = gen_bvp(&cfg.hr_trace, cfg.bvp_fs, cfg.duration)?;
    let bvp_ts = (0..bvp.len())
        .map(|j| cfg.t0 + j as f64 / cfg.bvp_fs + cfg.offset_s)
        .collect();
    let meta = serde_json::json!({
        "subject": format!("synth-{}", cfg.seed),
        "scenario": cfg.scenario,
        "synth": cfg,
    });

    let clip = ClipContainer {
        width: cfg.width,
        height: cfg.height,
        nominal_fps: cfg.fps as f32,
        frames,
        frame_ts,
        bvp_vals: bvp.samples.iter().map(|&v| v as f32).collect(),
        bvp_ts,
        meta: meta.to_string(),
    };
    clip.validate()?;
    Ok(clip)
}

/// Centered moving average of length `k` along time for every pixel value;
/// edge windows are truncated.
fn box_filter_time(raw: &[f32], t_count: usize, per_frame: usize, k: usize) -> Vec<f32> {
    let before = (k - 1) / 2;
    let after = k / 2;
    let mut out = vec![0f32; raw.len()];
    let mut col = vec![0f64; t_count + 1];
    for p in 0..per_frame {
        for t in 0..t_count {
            col[t + 1] = col[t] + raw[t * per_frame + p] as f64;
        }
        for t in 0..t_count {
            let lo = t.saturating_sub(before);
            let hi = (t + after + 1).min(t_count);
            out[t * per_frame + p] = ((col[hi] - col[lo]) / (hi - lo) as f64) as f32;
        }
    }
    out
}

/// Inclusive `[lo, hi]` range drawn uniformly per clip.
pub type Span = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub seed: u64,
    pub n: usize,
    pub duration: f64,
    pub fps: f64,
    pub height: u16,
    pub width: u16,
    pub bvp_fs: f64,
    pub hr_range: Span,
    /// Maximum absolute heart-rate change over a clip, bpm (linear ramp).
    pub hr_change: f64,
    pub diffuse_gain: Span,
    pub noise_std: Span,
    pub drift_amp: Span,
    pub specular_amp: Span,
    pub motion_amp: Span,
    pub offset_s: Span,
    pub smooth_k: usize,
    pub scenario: String,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n: 20,
            duration: 30.0,
            fps: 30.0,
            height: 8,
            width: 8,
            bvp_fs: 60.0,
            hr_range: [45.0, 150.0],
            hr_change: 0.0,
            diffuse_gain: [1.0, 1.0],
            noise_std: [0.0, 0.0],
            drift_amp: [0.0, 0.0],
            specular_amp: [0.0, 0.0],
            motion_amp: [0.0, 0.0],
            offset_s: [0.0, 0.0],
            smooth_k: 1,
            scenario: "clean".into(),
        }
    }
}

/// SplitMix64 finalizer; derives independent per-clip seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw(rng: &mut ChaCha8Rng, span: Span) -> f64 {
    if span[1] > span[0] {
        rng.random_range(span[0]..=span[1])
    } else {
        span[0]
    }
}

impl CorpusConfig {
    /// Configuration of clip `index`; a pure function of `(seed, index)`.
    pub fn clip_config(&self, index: usize) -> SynthConfig {
        let seed = derive_seed(self.seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF_EE00);
        let lo = self.hr_range[0].max(40.0);
        let hi = self.hr_range[1].min(180.0);
        let start = draw(&mut rng, [lo, hi]);
        let change = draw(&mut rng, [-self.hr_change, self.hr_change]);
        let end = (start + change).clamp(lo, hi);
        let hr_trace = if end == start {
            HrTrace::constant(start)
        } else {
            HrTrace(vec![(0.0, start), (self.duration, end)])
        };
        let base_jitter = [
            draw(&mut rng, [-10.0, 10.0]),
            draw(&mut rng, [-10.0, 10.0]),
            draw(&mut rng, [-10.0, 10.0]),
        ];
        let defaults = SynthConfig::default();
        SynthConfig {
            duration: self.duration,
            fps: self.fps,
            height: self.height,
            width: self.width,
            hr_trace,
            diffuse_gain: draw(&mut rng, self.diffuse_gain),
            base_color: [
                defaults.base_color[0] + base_jitter[0],
                defaults.base_color[1] + base_jitter[1],
                defaults.base_color[2] + base_jitter[2],
            ],
            noise_std: draw(&mut rng, self.noise_std),
            drift_amp: draw(&mut rng, self.drift_amp),
            specular_amp: draw(&mut rng, self.specular_amp),
            motion_amp: draw(&mut rng, self.motion_amp).round(),
            offset_s: draw(&mut rng, self.offset_s),
            smooth_k: self.smooth_k.max(1),
            bvp_fs: self.bvp_fs,
            seed,
            scenario: self.scenario.clone(),
            ..defaults
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub file: String,
    pub mean_bpm: f64,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus: CorpusConfig,
    pub clips: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub clips: Vec<ClipContainer>,
    pub manifest: Manifest,
}

pub fn clip_file_name(index: usize) -> String {
    format!("clip_{index:03}.pbvc")
}

/// Generates `cfg.n` clips and their manifest.
pub fn gen_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("corpus needs n >= 1".into()));
    }
    let mut clips = Vec::with_capacity(cfg.n);
    let mut entries = Vec::with_capacity(cfg.n);
    for index in 0..cfg.n {
        let config = cfg.clip_config(index);
        let mean_bpm = mean_bpm(&config.hr_trace, config.duration);
        clips.push(render_clip(&config)?);
        entries.push(ManifestEntry {
            index,
            file: clip_file_name(index),
            mean_bpm,
            config,
        });
    }
    Ok(Corpus {
        clips,
        manifest: Manifest {
            corpus: cfg.clone(),
            clips: entries,
        },
    })
}

fn mean_bpm(hr: &HrTrace, duration: f64) -> f64 {
    hr.phase_at(duration) / (2.0 * PI) / duration * 60.0
}

/// Writes `clip_NNN.pbvc` files plus `manifest.json`; returns the manifest
/// path.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (clip, entry) in corpus.clips.iter().zip(&corpus.manifest.clips) {
        write_clip(clip, dir.join(&entry.file))?;
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&corpus.manifest)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_of_constant_rate() {
        let hr = HrTrace::constant(60.0);
        assert!((hr.phase_at(1.0) - 2.0 * PI).abs() < 1e-12);
        assert!((hr.phase_at(2.5) - 5.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn phase_of_ramp_and_step() {
        let ramp = HrTrace(vec![(0.0, 60.0), (10.0, 120.0)]);
        // mean 90 bpm over 10 s = 15 cycles
        assert!((ramp.phase_at(10.0) - 30.0 * PI).abs() < 1e-9);
        let step = HrTrace(vec![(0.0, 60.0), (30.0, 60.0), (30.0, 120.0)]);
        let cycles = step.phase_at(40.0) / (2.0 * PI);
        assert!((cycles - (30.0 + 20.0)).abs() < 1e-9, "{cycles}");
        assert_eq!(step.bpm_at(35.0), 120.0);
    }

    #[test]
    fn rejects_out_of_range_rate() {
        assert!(HrTrace::constant(200.0).validate().is_err());
        assert!(HrTrace(vec![(1.0, 60.0), (0.5, 60.0)]).validate().is_err());
    }

    #[test]
    fn static_scene_renders_identical_frames() {
        let cfg = SynthConfig {
            diffuse_gain: 0.0,
            duration: 2.0,
            ..SynthConfig::default()
        };
        let clip = render_clip(&cfg).unwrap();
        let first = clip.frame(0).to_vec();
        for i in 1..clip.frame_count() {
            assert_eq!(clip.frame(i), first.as_slice());
        }
    }

    #[test]
    fn same_seed_same_clip() {
        let cfg = SynthConfig {
            noise_std: 2.0,
            specular_amp: 1.0,
            motion_amp: 1.0,
            duration: 3.0,
            seed: 7,
            ..SynthConfig::default()
        };
        assert_eq!(render_clip(&cfg).unwrap(), render_clip(&cfg).unwrap());
        let other = SynthConfig {
            seed: 8,
            ..cfg.clone()
        };
        assert_ne!(
            render_clip(&cfg).unwrap().frames,
            render_clip(&other).unwrap().frames
        );
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
