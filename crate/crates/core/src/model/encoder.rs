use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::tokenize;
use crate::{seed, Scalar};

/// Token id reserved for words outside the vocabulary.
pub const UNK_ID: u32 = u32::MAX;

/// Sorted word list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let words: Vec<String> = words.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words, index }
    }

    /// Every token of every text.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        Self::from_words(texts.into_iter().flat_map(tokenize))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|w| self.id(w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Joint embedding width `d`.
    pub dim: usize,
    pub rank: usize,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { dim: 24, rank: 16, alpha: 16.0, tau: crate::objectives::DEFAULT_TAU }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 || self.rank == 0 {
            return Err(ModelError::InvalidConfig("dim and rank must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) || !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ModelError::InvalidConfig("alpha and tau must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Video side: frozen `w0` plus low-rank adapter `bm * a` scaled by `alpha / rank`.
/// Text side: mean of word embeddings. Both outputs are L2-normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder<T: Scalar> {
    pub w0: Array2<T>,
    pub a: Array2<T>,
    pub bm: Array2<T>,
    pub alpha: T,
    pub word_emb: Array2<T>,
    /// Fixed vector for unknown tokens; never trained.
    pub unk: Array1<T>,
    pub vocab: Vocab,
    pub tau: T,
}

fn gaussian<T: Scalar>(rng: &mut impl Rng, shape: (usize, usize), sigma: f64) -> Array2<T> {
    Array2::from_shape_simple_fn(shape, || T::of(sigma * rng.sample::<f64, _>(StandardNormal)))
}

fn normalize_rows<T: Scalar>(m: &mut Array2<T>) -> Result<Array1<T>, ModelError> {
    let mut norms = Array1::zeros(m.nrows());
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        let n = row.dot(&row).sqrt();
        if !(n.as_f64() >= 1e-12) {
            return Err(ModelError::ZeroVector);
        }
        row /= n;
        norms[i] = n;
    }
    Ok(norms)
}

/// `(dY - Y * rowdot(Y, dY)) / norms`: backprop through row normalisation.
fn unnormalize_grad<T: Scalar>(y: &Array2<T>, dy: &Array2<T>, norms: &Array1<T>) -> Array2<T> {
    let mut g = dy.clone();
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        let yi = y.row(i);
        let proj = yi.dot(&dy.row(i));
        row.scaled_add(-proj, &yi);
        row /= norms[i];
    }
    g
}

/// Forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Encoded<T: Scalar> {
    pub out: Array2<T>,
    norms: Array1<T>,
}

impl<T: Scalar> DualEncoder<T> {
    /// Fresh encoder: `w0 ~ N(0, 1/d_in)`, `a ~ N(0, 0.02^2)`, `bm = 0`, word vectors `~ N(0, 1/d)`.
    pub fn init(cfg: &ModelConfig, d_in: usize, vocab: Vocab, root_seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        if d_in == 0 {
            return Err(ModelError::InvalidConfig("input width must be >= 1".into()));
        }
        let d = cfg.dim;
        let w0 = gaussian(&mut seed::rng(root_seed, "w0", 0), (d, d_in), 1.0 / (d_in as f64).sqrt());
        let a = gaussian(&mut seed::rng(root_seed, "adapter_a", 0), (cfg.rank, d_in), 0.02);
        let bm = Array2::zeros((d, cfg.rank));
        let emb_sigma = 1.0 / (d as f64).sqrt();
        let word_emb = gaussian(&mut seed::rng(root_seed, "word_emb", 0), (vocab.len(), d), emb_sigma);
        let unk = gaussian(&mut seed::rng(root_seed, "unk", 0), (1, d), emb_sigma).row(0).to_owned();
        Ok(Self { w0, a, bm, alpha: T::of(cfg.alpha), word_emb, unk, vocab, tau: T::of(cfg.tau) })
    }

    pub fn dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    /// `alpha / rank`.
    pub fn scale(&self) -> T {
        self.alpha / T::of(self.rank() as f64)
    }

    pub fn w_eff(&self) -> Array2<T> {
        &self.w0 + &(self.bm.dot(&self.a) * self.scale())
    }

    /// `r*D_in + d*r + |vocab|*d`.
    pub fn trainable_params(&self) -> usize {
        self.a.len() + self.bm.len() + self.word_emb.len()
    }

    /// Fold the adapter into `w0` and restart it from a fresh `a` with `bm = 0`.
    /// The effective video weight is unchanged.
    pub fn merge_adapter(&mut self, root_seed: u64) {
        self.w0 = self.w_eff();
        self.a = gaussian(&mut seed::rng(root_seed, "adapter_a_merged", 0), self.a.dim(), 0.02);
        self.bm.fill(T::zero());
    }

    pub fn encode_video(&self, feature: ArrayView1<T>) -> Result<Array1<T>, ModelError> {
        let x = feature.insert_axis(Axis(0)).to_owned();
        Ok(self.forward_videos(&x)?.out.row(0).to_owned())
    }

    pub fn encode_text(&self, tokens: &[u32]) -> Result<Array1<T>, ModelError> {
        Ok(self.forward_texts(&[tokens])?.out.row(0).to_owned())
    }

    pub fn encode_caption(&self, text: &str) -> Result<Array1<T>, ModelError> {
        self.encode_text(&self.vocab.encode(text))
    }

    /// Rows of `x` (n x D_in) to normalised embeddings.
    pub fn forward_videos(&self, x: &Array2<T>) -> Result<Encoded<T>, ModelError> {
        if x.ncols() != self.input_dim() {
            return Err(ModelError::Shape(format!("feature width {} vs {}", x.ncols(), self.input_dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature);
        }
        // X W0^T + s (X A^T) Bm^T keeps the adapter path low rank.
        let mut h = x.dot(&self.w0.t());
        let xa = x.dot(&self.a.t());
        h.scaled_add(self.scale(), &xa.dot(&self.bm.t()));
        let norms = normalize_rows(&mut h)?;
        Ok(Encoded { out: h, norms })
    }

    pub fn forward_texts(&self, texts: &[&[u32]]) -> Result<Encoded<T>, ModelError> {
        let d = self.dim();
        let mut out = Array2::zeros((texts.len(), d));
        for (i, toks) in texts.iter().enumerate() {
            if toks.is_empty() {
                return Err(ModelError::EmptyTokenList);
            }
            let mut row = out.row_mut(i);
            for &t in toks.iter() {
                if t == UNK_ID {
                    row += &self.unk;
                } else {
                    row += &self.word_emb.row(t as usize);
                }
            }
            row /= T::of(toks.len() as f64);
        }
        let norms = normalize_rows(&mut out)?;
        Ok(Encoded { out, norms })
    }

    /// Gradients of the adapter factors `(d a, d bm)` given `d out`.
    pub fn backward_videos(&self, x: &Array2<T>, enc: &Encoded<T>, d_out: &Array2<T>) -> (Array2<T>, Array2<T>) {
        let gh = unnormalize_grad(&enc.out, d_out, &enc.norms);
        let s = self.scale();
        let xa = x.dot(&self.a.t());
        let d_bm = gh.t().dot(&xa) * s;
        let d_a = gh.dot(&self.bm).t().dot(x) * s;
        (d_a, d_bm)
    }

    /// Accumulate word-embedding gradients into `d_emb` (|vocab| x d). Unknown tokens get none.
    pub fn backward_texts(&self, texts: &[&[u32]], enc: &Encoded<T>, d_out: &Array2<T>, d_emb: &mut Array2<T>) {
        let gu = unnormalize_grad(&enc.out, d_out, &enc.norms);
        for (i, toks) in texts.iter().enumerate() {
            let g = gu.row(i).mapv(|v| v / T::of(toks.len() as f64));
            for &t in toks.iter() {
                if t != UNK_ID {
                    let mut row = d_emb.row_mut(t as usize);
                    row += &g;
                }
            }
        }
    }
}
