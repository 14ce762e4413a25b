//! Training windows from clips, with optional label-offset injection.

use pulsebench_core::clipio::{align_bvp_to_frames, inject_offset, ClipContainer};
use pulsebench_core::preprocess::{
    make_windows, prepare_frames, BoxTrack, InputNormalization, DEFAULT_BOX_ALPHA, MODEL_SIDE,
    WINDOW_FRAMES,
};
use pulsebench_core::synth::derive_seed;
use pulsebench_neural::{train_with, Architecture, ModelGraph, Sample, TrainConfig, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::ClipSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Frames between consecutive 450-frame training windows.
    pub stride_frames: usize,
    /// Per-clip BVP timestamp shift drawn uniformly from this range, seconds.
    pub label_offset_s: [f64; 2],
    /// Seeds the offset draws.
    pub seed: u64,
    pub normalization: InputNormalization,
    pub box_alpha: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            stride_frames: WINDOW_FRAMES / 2,
            label_offset_s: [0.0, 0.0],
            seed: 42,
            normalization: InputNormalization::default(),
            box_alpha: DEFAULT_BOX_ALPHA,
        }
    }
}

impl DatasetConfig {
    /// Offset applied to clip `index`.
    pub fn offset_for(&self, index: usize) -> f64 {
        let [lo, hi] = self.label_offset_s;
        if hi > lo {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, index as u64));
            rng.random_range(lo..hi)
        } else {
            lo
        }
    }
}

/// Normalized windows of one clip whose labels are shifted by `offset_s`.
pub fn clip_samples(
    clip: &ClipContainer,
    boxes: Option<&BoxTrack>,
    arch: Architecture,
    cfg: &DatasetConfig,
    offset_s: f64,
) -> Result<Vec<Sample<f32>>> {
    let shifted;
    let labelled = if offset_s != 0.0 {
        shifted = inject_offset(clip, offset_s);
        &shifted
    } else {
        clip
    };
    let labels = align_bvp_to_frames(labelled)?;
    let frames = prepare_frames(clip, boxes, cfg.box_alpha, MODEL_SIDE)?;
    let windows = make_windows(
        &frames,
        &labels,
        MODEL_SIDE,
        WINDOW_FRAMES,
        cfg.stride_frames.max(1),
        cfg.normalization,
    )?;
    windows
        .into_iter()
        .map(|w| {
            Ok(Sample {
                x: arch.prepare_input(&w.x)?,
                y: w.y,
            })
        })
        .collect()
}

/// Windows of every clip; clip `i` gets offset [`DatasetConfig::offset_for`]`(i)`.
pub fn build_dataset(
    clips: &[ClipContainer],
    arch: Architecture,
    cfg: &DatasetConfig,
) -> Result<Vec<Sample<f32>>> {
    let mut out = Vec::new();
    for (i, clip) in clips.iter().enumerate() {
        out.extend(clip_samples(clip, None, arch, cfg, cfg.offset_for(i))?);
    }
    Ok(out)
}

/// Everything `train` needs, as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainJob {
    pub model: Architecture,
    pub source: ClipSource,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    /// Weight-initialization seed; defaults to `train.seed`.
    pub init_seed: Option<u64>,
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            model: Architecture::SeqRppg,
            source: ClipSource::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            init_seed: None,
        }
    }
}

pub struct TrainOutcome {
    pub model: ModelGraph<f32>,
    pub report: TrainReport,
    pub windows: usize,
}

pub fn run_training(job: &TrainJob, on_epoch: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    job.train.validate()?;
    let handles = job.source.handles()?;
    if handles.is_empty() {
        return Err(Error::Config("training source has no clips".into()));
    }
    let mut samples = Vec::new();
    for (i, h) in handles.iter().enumerate() {
        let (clip, boxes) = h.container()?;
        samples.extend(clip_samples(
            &clip,
            boxes.as_ref(),
            job.model,
            &job.dataset,
            job.dataset.offset_for(i),
        )?);
    }
    let mut model = job
        .model
        .build::<f32>(job.init_seed.unwrap_or(job.train.seed));
    let report = train_with(&mut model, &samples, &job.train, on_epoch)?;
    Ok(TrainOutcome {
        model,
        report,
        windows: samples.len(),
    })
}
