//! Neural rPPG models: layer kernels with hand-written backward passes,
//! Seq-rPPG and NoobHeart assemblies, training and the PBWT weight format.

pub mod error;
pub mod graph;
pub mod layers;
pub mod models;
pub mod scalar;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{LayerSummary, ModelGraph};
pub use layers::Mode;
pub use models::{build_noobheart, build_seq_rppg, build_seq_rppg_with, Architecture, SeqRppgDims};
pub use scalar::Real;
pub use train::{predict, train, train_with, LossKind, Sample, TrainConfig, TrainReport};
pub use weights::{load_into, load_weights, save_weights};
