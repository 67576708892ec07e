//! Convolutional autoencoder used as a neural image codec.
//!
//! Everything here (layers, backward passes, optimizer) is implemented
//! directly on `f64` buffers; training is bit-reproducible for fixed seeds.

mod checkpoint;
mod embedding;
mod layers;
mod model;
mod optim;
mod tensor;
mod train;

use thiserror::Error;

pub use checkpoint::{load_model, save_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use embedding::{decode_embedding, embedding_preview, encode_embedding, reconstruct, EMBEDDING_RANGE_BYTES};
pub use layers::{sigmoid, upsample2, upsample2_backward, Conv2d, ConvGrad};
pub use model::{build_model, Gradients, Model, ModelConfig, SkipMode, MAX_BLOCKS, MAX_WIDTH};
pub use optim::{backward_and_step, AdamState};
pub use tensor::{loss_mse, Tensor};
pub use train::{
    ablation_plan, evaluate, run_ablation, train, train_with_progress, Ablation, EpochStats, TrainConfig,
    TrainingReport, CURVE_CSV_HEADER,
};

use crate::metrics::MetricsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },
    #[error("dataset too small: {have} images, need at least {need}")]
    DatasetTooSmall { have: usize, need: usize },
    #[error("model/blob mismatch: {0}")]
    BlobMismatch(String),
    #[error("embedding decode needs a model without encoder-decoder skips (use codec_honest)")]
    SkipsUnsupported,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
