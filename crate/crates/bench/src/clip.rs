use std::path::{Path, PathBuf};

use pulsebench_core::clipio::{align_bvp_to_frames, read_clip, ClipContainer};
use pulsebench_core::preprocess::{prepare_frames, BoxTrack, DEFAULT_BOX_ALPHA, MODEL_SIDE};
use pulsebench_core::synth::{clip_file_name, render_clip, CorpusConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A clip reduced to what every algorithm consumes.
#[derive(Debug, Clone)]
pub struct PreparedClip {
    pub id: String,
    /// `T x 8 x 8 x 3` pixel values (0..=255).
    pub frames: Vec<f32>,
    pub n_frames: usize,
    pub fs: f64,
    /// Ground-truth BVP resampled to the frame timestamps.
    pub gt: Vec<f64>,
}

impl PreparedClip {
    pub fn new(
        id: impl Into<String>,
        clip: &ClipContainer,
        boxes: Option<&BoxTrack>,
        box_alpha: f64,
    ) -> Result<Self> {
        clip.validate()?;
        let frames = prepare_frames(clip, boxes, box_alpha, MODEL_SIDE)?;
        Ok(Self {
            id: id.into(),
            frames,
            n_frames: clip.frame_count(),
            fs: clip.effective_fps(),
            gt: align_bvp_to_frames(clip)?,
        })
    }

    pub fn from_clip(id: impl Into<String>, clip: &ClipContainer) -> Result<Self> {
        Self::new(id, clip, None, DEFAULT_BOX_ALPHA)
    }
}

/// Where benchmark clips come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClipSource {
    /// Every `*.pbvc` in a directory; an optional `<stem>.boxes.json`
    /// sidecar supplies per-frame face boxes.
    Dir(PathBuf),
    Synth(CorpusConfig),
}

impl Default for ClipSource {
    fn default() -> Self {
        ClipSource::Synth(CorpusConfig::default())
    }
}

/// A clip that has been located but not yet loaded or rendered.
#[derive(Debug, Clone)]
pub enum ClipHandle {
    File {
        id: String,
        path: PathBuf,
    },
    Synth {
        id: String,
        corpus: CorpusConfig,
        index: usize,
    },
}

impl ClipHandle {
    pub fn id(&self) -> &str {
        match self {
            ClipHandle::File { id, .. } | ClipHandle::Synth { id, .. } => id,
        }
    }

    /// The raw container plus its face-box sidecar, if any.
    pub fn container(&self) -> Result<(ClipContainer, Option<BoxTrack>)> {
        match self {
            ClipHandle::File { path, .. } => {
                let clip = read_clip(path)?;
                let sidecar = path.with_extension("boxes.json");
                let boxes = if sidecar.exists() {
                    Some(BoxTrack::from_sidecar(&sidecar)?)
                } else {
                    None
                };
                Ok((clip, boxes))
            }
            ClipHandle::Synth { corpus, index, .. } => {
                Ok((render_clip(&corpus.clip_config(*index))?, None))
            }
        }
    }

    pub fn load(&self, box_alpha: f64) -> Result<PreparedClip> {
        let (clip, boxes) = self.container()?;
        PreparedClip::new(self.id(), &clip, boxes.as_ref(), box_alpha)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl ClipSource {
    /// Handles sorted by clip id.
    pub fn handles(&self) -> Result<Vec<ClipHandle>> {
        let mut out = match self {
            ClipSource::Dir(dir) => {
                let entries = std::fs::read_dir(dir).map_err(|e| {
                    Error::Config(format!("cannot read clip directory {}: {e}", dir.display()))
                })?;
                let mut v = Vec::new();
                for e in entries {
                    let path = e?.path();
                    if path.extension().is_some_and(|x| x == "pbvc") {
                        v.push(ClipHandle::File {
                            id: stem(&path),
                            path,
                        });
                    }
                }
                v
            }
            ClipSource::Synth(corpus) => {
                if corpus.n == 0 {
                    return Err(Error::Config("synthetic corpus needs n >= 1".into()));
                }
                (0..corpus.n)
                    .map(|index| ClipHandle::Synth {
                        id: stem(Path::new(&clip_file_name(index))),
                        corpus: corpus.clone(),
                        index,
                    })
                    .collect()
            }
        };
        out.sort_by(|a, b| a.id().cmp(b.id()));
        Ok(out)
    }
}
