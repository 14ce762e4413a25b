//! Pulse-extraction algorithms behind one trait, created by name at runtime.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pulsebench_core::preprocess::{
    normalize_frames, InputNormalization, MODEL_SIDE, WINDOW_FRAMES,
};
use pulsebench_core::unsupervised::{chrom, green, ica_pulse, pos, RgbTrace, DEFAULT_WINDOW_S};
use pulsebench_neural::{load_into, predict, Architecture, ModelGraph};
use serde::{Deserialize, Serialize};

use crate::clip::PreparedClip;
use crate::error::{Error, Result};

/// Step between neural inference windows; overlapping outputs are averaged.
pub const INFERENCE_STEP: usize = WINDOW_FRAMES / 2;

pub trait PulseAlgorithm: Send + Sync {
    fn name(&self) -> &str;

    /// Pulse waveform sampled at the clip's frame rate, one value per frame.
    fn predict(&self, clip: &PreparedClip) -> Result<Vec<f64>>;
}

/// Algorithm selection as it appears in configs: either a bare name or an
/// object with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpecRepr", into = "SpecRepr")]
pub struct AlgorithmSpec {
    pub name: String,
    /// PBWT file; required for neural algorithms.
    pub weights: Option<PathBuf>,
    /// CHROM/POS window length in seconds.
    pub win_seconds: Option<f64>,
}

impl AlgorithmSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            weights: None,
            win_seconds: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Name(String),
    Full {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        win_seconds: Option<f64>,
    },
}

impl From<SpecRepr> for AlgorithmSpec {
    fn from(r: SpecRepr) -> Self {
        match r {
            SpecRepr::Name(name) => AlgorithmSpec::named(&name),
            SpecRepr::Full {
                name,
                weights,
                win_seconds,
            } => AlgorithmSpec {
                name,
                weights,
                win_seconds,
            },
        }
    }
}

impl From<AlgorithmSpec> for SpecRepr {
    fn from(s: AlgorithmSpec) -> Self {
        SpecRepr::Full {
            name: s.name,
            weights: s.weights,
            win_seconds: s.win_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handcrafted {
    Green,
    Chrom,
    Pos,
    Ica,
}

#[derive(Debug, Clone)]
pub struct HandcraftedAlgorithm {
    kind: Handcrafted,
    win_seconds: f64,
}

impl HandcraftedAlgorithm {
    pub fn new(kind: Handcrafted) -> Self {
        Self {
            kind,
            win_seconds: DEFAULT_WINDOW_S,
        }
    }

    pub fn with_window(mut self, win_seconds: f64) -> Self {
        self.win_seconds = win_seconds;
        self
    }
}

impl PulseAlgorithm for HandcraftedAlgorithm {
    fn name(&self) -> &str {
        match self.kind {
            Handcrafted::Green => "green",
            Handcrafted::Chrom => "chrom",
            Handcrafted::Pos => "pos",
            Handcrafted::Ica => "ica",
        }
    }

    fn predict(&self, clip: &PreparedClip) -> Result<Vec<f64>> {
        let trace = RgbTrace::from_frames(&clip.frames, MODEL_SIDE * MODEL_SIDE, clip.fs)?;
        Ok(match self.kind {
            Handcrafted::Green => green(&trace)?,
            Handcrafted::Chrom => chrom(&trace, self.win_seconds)?,
            Handcrafted::Pos => pos(&trace, self.win_seconds)?,
            Handcrafted::Ica => ica_pulse(&trace)?.pulse,
        })
    }
}

/// A trained network run over overlapping 450-frame windows.
#[derive(Debug, Clone)]
pub struct NeuralAlgorithm {
    arch: Architecture,
    model: ModelGraph<f32>,
    normalization: InputNormalization,
}

impl NeuralAlgorithm {
    pub fn from_model(arch: Architecture, model: ModelGraph<f32>) -> Self {
        Self {
            arch,
            model,
            normalization: InputNormalization::default(),
        }
    }

    pub fn from_weights(arch: Architecture, path: &std::path::Path) -> Result<Self> {
        let mut model = arch.build::<f32>(0);
        load_into(&mut model, path)?;
        Ok(Self::from_model(arch, model))
    }
}

fn standardized(v: &[f32]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().map(|&a| a as f64).sum::<f64>() / n;
    let sd = (v.iter().map(|&a| (a as f64 - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|&a| (a as f64 - m) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Window starts covering `total` frames with step [`INFERENCE_STEP`]; the
/// last window is aligned to the end.
pub fn inference_starts(total: usize) -> Vec<usize> {
    if total < WINDOW_FRAMES {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..=(total - WINDOW_FRAMES) / INFERENCE_STEP)
        .map(|i| i * INFERENCE_STEP)
        .collect();
    if starts.last() != Some(&(total - WINDOW_FRAMES)) {
        starts.push(total - WINDOW_FRAMES);
    }
    starts
}

impl PulseAlgorithm for NeuralAlgorithm {
    fn name(&self) -> &str {
        self.arch.name()
    }

    fn predict(&self, clip: &PreparedClip) -> Result<Vec<f64>> {
        let per_frame = MODEL_SIDE * MODEL_SIDE * 3;
        let starts = inference_starts(clip.n_frames);
        if starts.is_empty() {
            return Err(pulsebench_core::Error::TooShort(format!(
                "{} frames, {} needs {WINDOW_FRAMES}",
                clip.n_frames, self.arch
            ))
            .into());
        }
        let inputs = starts
            .iter()
            .map(|&t0| {
                let raw = &clip.frames[t0 * per_frame..(t0 + WINDOW_FRAMES) * per_frame];
                let x = normalize_frames(raw, WINDOW_FRAMES, MODEL_SIDE, self.normalization)?;
                Ok(self.arch.prepare_input(&x)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = self.model.clone();
        let outputs = predict(&mut model, &inputs, 4)?;
        let mut sum = vec![0.0; clip.n_frames];
        let mut count = vec![0usize; clip.n_frames];
        for (&t0, out) in starts.iter().zip(&outputs) {
            for (i, v) in standardized(out).into_iter().enumerate() {
                sum[t0 + i] += v;
                count[t0 + i] += 1;
            }
        }
        Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
    }
}

pub type Factory = fn(&AlgorithmSpec) -> Result<Box<dyn PulseAlgorithm>>;

/// Name -> constructor table. [`Default`] registers every built-in algorithm.
pub struct AlgorithmRegistry {
    factories: BTreeMap<String, Factory>,
}

fn handcrafted(kind: Handcrafted, spec: &AlgorithmSpec) -> Result<Box<dyn PulseAlgorithm>> {
    let mut a = HandcraftedAlgorithm::new(kind);
    if let Some(w) = spec.win_seconds {
        if !(w > 0.0) {
            return Err(Error::Config(format!(
                "{}: win_seconds must be > 0",
                spec.name
            )));
        }
        a = a.with_window(w);
    }
    Ok(Box::new(a))
}

fn neural(arch: Architecture, spec: &AlgorithmSpec) -> Result<Box<dyn PulseAlgorithm>> {
    let path = spec
        .weights
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} needs a weights file", spec.name)))?;
    if !path.exists() {
        return Err(Error::Config(format!(
            "weights file {} not found",
            path.display()
        )));
    }
    Ok(Box::new(NeuralAlgorithm::from_weights(arch, path)?))
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("green", |s| handcrafted(Handcrafted::Green, s));
        r.register("chrom", |s| handcrafted(Handcrafted::Chrom, s));
        r.register("pos", |s| handcrafted(Handcrafted::Pos, s));
        r.register("ica", |s| handcrafted(Handcrafted::Ica, s));
        r.register("seq_rppg", |s| neural(Architecture::SeqRppg, s));
        r.register("noobheart", |s| neural(Architecture::NoobHeart, s));
        r
    }
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, spec: &AlgorithmSpec) -> Result<Box<dyn PulseAlgorithm>> {
        let factory = self.factories.get(&spec.name).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm `{}`; valid names: {}",
                spec.name,
                self.names().join(", ")
            ))
        })?;
        factory(spec)
    }
}
