//! Asymmetric contrastive objectives with hard negatives for egocentric video-text
//! dual encoders, plus a multi-choice verb/noun benchmark, all on feature vectors.

pub mod bench;
pub mod config;
pub mod corpus;
mod error;
pub mod experiment;
pub mod layout;
pub mod model;
pub mod negmine;
pub mod objectives;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use error::Error;
pub use scalar::Scalar;

pub type DualEncoderF32 = model::DualEncoder<f32>;
pub type DualEncoderF64 = model::DualEncoder<f64>;
pub type EmbeddingBatchF32 = objectives::EmbeddingBatch<f32>;
pub type EmbeddingBatchF64 = objectives::EmbeddingBatch<f64>;
pub type TrainDataF32 = model::TrainData<f32>;
pub type TrainDataF64 = model::TrainData<f64>;
