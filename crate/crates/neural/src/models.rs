//! Model assemblies and the by-name architecture registry.

use pulsebench_core::numerics::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::layers::{BatchNorm1d, Conv, Flatten, Layer, Padding, Relu, SpatialMean, SpectralBlock};
use crate::scalar::Real;

pub const FRAMES: usize = 450;
pub const SIDE: usize = 8;
pub const COLORS: usize = 3;

/// Seq-rPPG hyperparameters. [`Default`] is the published configuration;
/// smaller values give the same topology for gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqRppgDims {
    pub seq_len: usize,
    pub channels: usize,
    pub stride: usize,
    pub spectral_kernels: [usize; 2],
    pub mid_kernel: usize,
    pub head_channels: usize,
    pub head_kernel: usize,
}

impl Default for SeqRppgDims {
    fn default() -> Self {
        Self {
            seq_len: FRAMES * COLORS,
            channels: SIDE * SIDE,
            stride: COLORS,
            spectral_kernels: [5, 3],
            mid_kernel: 10,
            head_channels: 32,
            head_kernel: 5,
        }
    }
}

pub fn build_seq_rppg<T: Real>(seed: u64) -> ModelGraph<T> {
    build_seq_rppg_with(&SeqRppgDims::default(), seed).expect("published configuration is valid")
}

pub fn build_seq_rppg_with<T: Real>(d: &SeqRppgDims, seed: u64) -> Result<ModelGraph<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = d.channels;
    let layers: Vec<Box<dyn Layer<T>>> = vec![
        Box::new(Conv::conv1d(
            "conv_in",
            c,
            c,
            d.stride,
            d.stride,
            Padding::Valid,
            &mut rng,
        )?),
        Box::new(SpectralBlock::new(
            "spectral1",
            c,
            d.spectral_kernels[0],
            &mut rng,
        )?),
        Box::new(Conv::conv1d(
            "conv_mid",
            c,
            c,
            d.mid_kernel,
            1,
            Padding::Same,
            &mut rng,
        )?),
        Box::new(BatchNorm1d::new("bn_mid", c)),
        Box::new(Relu::new()),
        Box::new(SpectralBlock::new(
            "spectral2",
            c,
            d.spectral_kernels[1],
            &mut rng,
        )?),
        Box::new(Conv::conv1d(
            "conv_head",
            c,
            d.head_channels,
            d.head_kernel,
            1,
            Padding::Same,
            &mut rng,
        )?),
        Box::new(BatchNorm1d::new("bn_head", d.head_channels)),
        Box::new(Relu::new()),
        Box::new(Conv::conv1d(
            "conv_out",
            d.head_channels,
            1,
            1,
            1,
            Padding::Valid,
            &mut rng,
        )?),
        Box::new(Flatten::new()),
    ];
    ModelGraph::new("seq_rppg", vec![d.seq_len, c], layers)
}

/// Reference reconstruction sized to the published NoobHeart envelope
/// (about 0.36K parameters); the original architecture is not public.
pub fn build_noobheart<T: Real>(seed: u64) -> ModelGraph<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = [3, 2, 2];
    let s = [1, 2, 2];
    let layers: Vec<Box<dyn Layer<T>>> = vec![
        Box::new(Conv::conv3d("conv3d_1", COLORS, 4, k, s, Padding::Same, &mut rng).unwrap()),
        Box::new(Relu::new()),
        Box::new(Conv::conv3d("conv3d_2", 4, 4, k, s, Padding::Same, &mut rng).unwrap()),
        Box::new(Relu::new()),
        Box::new(SpatialMean::new()),
        Box::new(Conv::conv1d("conv_out", 4, 1, 1, 1, Padding::Valid, &mut rng).unwrap()),
        Box::new(Flatten::new()),
    ];
    ModelGraph::new("noobheart", vec![FRAMES, SIDE, SIDE, COLORS], layers).unwrap()
}

/// `T x H x W x 3 -> 3T x HW`: row `3t + c`, column `W*row + col`.
pub fn reshape_video_to_sequence<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let &[t, h, w, c] = x.shape() else {
        return Err(Error::Shape(format!(
            "expected T x H x W x 3, got {:?}",
            x.shape()
        )));
    };
    if c != COLORS {
        return Err(Error::Shape(format!("expected 3 colour channels, got {c}")));
    }
    let hw = h * w;
    let src = x.data();
    let mut out = vec![T::zero(); x.len()];
    for f in 0..t {
        for p in 0..hw {
            for ch in 0..c {
                out[(f * c + ch) * hw + p] = src[(f * hw + p) * c + ch];
            }
        }
    }
    Ok(Tensor::new(vec![t * c, hw], out)?)
}

/// Inverse of [`reshape_video_to_sequence`].
pub fn sequence_to_video<T: Real>(s: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let &[l, hw] = s.shape() else {
        return Err(Error::Shape(format!(
            "expected 3T x HW, got {:?}",
            s.shape()
        )));
    };
    if hw != h * w || l % COLORS != 0 {
        return Err(Error::Shape(format!(
            "{:?} is not a {h}x{w} RGB sequence",
            s.shape()
        )));
    }
    let t = l / COLORS;
    let src = s.data();
    let mut out = vec![T::zero(); s.len()];
    for f in 0..t {
        for p in 0..hw {
            for ch in 0..COLORS {
                out[(f * hw + p) * COLORS + ch] = src[(f * COLORS + ch) * hw + p];
            }
        }
    }
    Ok(Tensor::new(vec![t, h, w, COLORS], out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SeqRppg,
    #[serde(rename = "noobheart")]
    NoobHeart,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::SeqRppg, Architecture::NoobHeart];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SeqRppg => "seq_rppg",
            Architecture::NoobHeart => "noobheart",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn build<T: Real>(self, seed: u64) -> ModelGraph<T> {
        match self {
            Architecture::SeqRppg => build_seq_rppg(seed),
            Architecture::NoobHeart => build_noobheart(seed),
        }
    }

    /// Converts a `450 x 8 x 8 x 3` window into this model's per-sample input.
    pub fn prepare_input<T: Real>(self, window: &Tensor<T>) -> Result<Tensor<T>> {
        if window.shape() != [FRAMES, SIDE, SIDE, COLORS] {
            return Err(Error::Shape(format!(
                "expected a {FRAMES}x{SIDE}x{SIDE}x{COLORS} window, got {:?}",
                window.shape()
            )));
        }
        match self {
            Architecture::SeqRppg => reshape_video_to_sequence(window),
            Architecture::NoobHeart => Ok(window.clone()),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
