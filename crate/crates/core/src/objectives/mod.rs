//! Contrastive objectives over L2-normalised embeddings, with hand-derived gradients.

mod loss;
mod positives;

use ndarray::Array2;

use crate::Scalar;

pub use loss::{
    ego_nce, egoncepp_t2v, egoncepp_total, egoncepp_v2t, egoncepp_v2t_logit_grads, info_nce, info_nce_t2v,
    info_nce_v2t, sim_matrix,
};
pub use positives::{make_pos_sets, PosMode, PositiveSets};

/// Temperature used when nothing else is configured.
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ObjectiveError {
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("batch needs at least {need} rows, got {have}")]
    BatchTooSmall { have: usize, need: usize },
    #[error("EgoNCE needs both augmented blocks")]
    MissingAugBatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("positive set {0} is empty")]
    EmptyPositiveSet(usize),
    #[error("invalid positive sets: {0}")]
    BadPositiveSet(String),
}

/// Embeddings for one training or evaluation batch.
///
/// Losses use raw dot products and do not renormalise, so finite-difference
/// probes may step off the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch<T: Scalar> {
    pub video: Array2<T>,
    pub text: Array2<T>,
    pub aug_video: Option<Array2<T>>,
    pub aug_text: Option<Array2<T>>,
    /// Row `i` stacks the verb and noun negatives of caption `i` (possibly zero rows).
    pub neg_text: Option<Vec<Array2<T>>>,
    pub tau: T,
}

impl<T: Scalar> EmbeddingBatch<T> {
    pub fn new(video: Array2<T>, text: Array2<T>, tau: T) -> Self {
        Self { video, text, aug_video: None, aug_text: None, neg_text: None, tau }
    }

    pub fn with_aug(mut self, aug_video: Array2<T>, aug_text: Array2<T>) -> Self {
        self.aug_video = Some(aug_video);
        self.aug_text = Some(aug_text);
        self
    }

    pub fn with_negs(mut self, neg_text: Vec<Array2<T>>) -> Self {
        self.neg_text = Some(neg_text);
        self
    }

    pub fn len(&self) -> usize {
        self.video.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.video.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.video.ncols()
    }

    /// Shapes agree, every entry is finite and the temperature is positive.
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let tau = self.tau.as_f64();
        if !(tau > 0.0) {
            return Err(ObjectiveError::NonPositiveTemperature(tau));
        }
        let (b, d) = self.video.dim();
        let check = |m: &Array2<T>, name: &'static str, rows: Option<usize>| {
            if m.ncols() != d || rows.is_some_and(|r| r != m.nrows()) {
                return Err(ObjectiveError::ShapeMismatch(format!(
                    "{name} is {:?}, expected {:?}x{d}",
                    m.dim(),
                    rows
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(ObjectiveError::NonFiniteInput(name));
            }
            Ok(())
        };
        check(&self.video, "video", Some(b))?;
        check(&self.text, "text", Some(b))?;
        if let Some(m) = &self.aug_video {
            check(m, "aug_video", Some(b))?;
        }
        if let Some(m) = &self.aug_text {
            check(m, "aug_text", Some(b))?;
        }
        if let Some(negs) = &self.neg_text {
            if negs.len() != b {
                return Err(ObjectiveError::ShapeMismatch(format!("{} negative blocks for {b} rows", negs.len())));
            }
            for m in negs {
                check(m, "neg_text", None)?;
            }
        }
        Ok(())
    }
}

/// Gradient of a loss with respect to each embedding block of an [`EmbeddingBatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T: Scalar> {
    pub video: Array2<T>,
    pub text: Array2<T>,
    pub aug_video: Option<Array2<T>>,
    pub aug_text: Option<Array2<T>>,
    pub neg_text: Option<Vec<Array2<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(batch: &EmbeddingBatch<T>) -> Self {
        let z = |m: &Array2<T>| Array2::zeros(m.raw_dim());
        Self {
            video: z(&batch.video),
            text: z(&batch.text),
            aug_video: batch.aug_video.as_ref().map(z),
            aug_text: batch.aug_text.as_ref().map(z),
            neg_text: batch.neg_text.as_ref().map(|v| v.iter().map(z).collect()),
        }
    }

    /// Blockwise sum; blocks missing on one side are taken from the other.
    pub fn add(mut self, other: Grads<T>) -> Self {
        fn merge<T: Scalar>(a: Option<Array2<T>>, b: Option<Array2<T>>) -> Option<Array2<T>> {
            match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            }
        }
        self.video = self.video + other.video;
        self.text = self.text + other.text;
        self.aug_video = merge(self.aug_video, other.aug_video);
        self.aug_text = merge(self.aug_text, other.aug_text);
        self.neg_text = match (self.neg_text, other.neg_text) {
            (Some(a), Some(b)) => Some(a.into_iter().zip(b).map(|(x, y)| x + y).collect()),
            (a, b) => a.or(b),
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T: Scalar> {
    pub value: T,
    pub grads: Grads<T>,
}

impl<T: Scalar> LossValue<T> {
    pub fn add(self, other: LossValue<T>) -> Self {
        Self { value: self.value + other.value, grads: self.grads.add(other.grads) }
    }
}
