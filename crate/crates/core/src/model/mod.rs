//! Dual encoder, optimiser and training loop.

mod checkpoint;
mod encoder;
mod optim;
mod train;

pub use checkpoint::{
    checksum, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use encoder::{DualEncoder, Encoded, ModelConfig, Vocab, UNK_ID};
pub use optim::{cosine_lr, AdamW, AdamWConfig, ParamGrads};
pub use train::{
    batch_loss, sample_batch, train, train_step, Objective, SampledBatch, Sampler, StepMetrics, TrainConfig,
    TrainData,
};

use crate::objectives::ObjectiveError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model or training config: {0}")]
    InvalidConfig(String),
    #[error("vector norm below 1e-12 before normalisation")]
    ZeroVector,
    #[error("empty token list")]
    EmptyTokenList,
    #[error("non-finite input feature")]
    NonFiniteFeature,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("batch of {batch} requested from {available} samples")]
    BatchTooLarge { batch: usize, available: usize },
    #[error("non-finite loss at step {step}: loss={loss}, grad_norm={grad_norm}")]
    NonFiniteLoss { step: usize, loss: f64, grad_norm: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("training data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
