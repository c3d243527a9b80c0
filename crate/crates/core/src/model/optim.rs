use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::DualEncoder;
use crate::Scalar;

/// Cosine decay from `lr0` at step 0 to `lr_min` at `total`.
pub fn cosine_lr(step: usize, total: usize, lr0: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let frac = step.min(total) as f64 / total as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Gradients of the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T: Scalar> {
    pub a: Array2<T>,
    pub bm: Array2<T>,
    pub word_emb: Array2<T>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_for(enc: &DualEncoder<T>) -> Self {
        Self {
            a: Array2::zeros(enc.a.raw_dim()),
            bm: Array2::zeros(enc.bm.raw_dim()),
            word_emb: Array2::zeros(enc.word_emb.raw_dim()),
        }
    }

    /// Global L2 norm, optionally leaving out the word embeddings.
    pub fn norm(&self, include_words: bool) -> T {
        let sq = |m: &Array2<T>| m.iter().map(|&x| x * x).sum::<T>();
        let mut s = sq(&self.a) + sq(&self.bm);
        if include_words {
            s += sq(&self.word_emb);
        }
        s.sqrt()
    }

    /// Rescale so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip(&mut self, max_norm: T, include_words: bool) -> T {
        let n = self.norm(include_words);
        if max_norm > T::zero() && n > max_norm {
            let f = max_norm / n;
            self.a *= f;
            self.bm *= f;
            self.word_emb *= f;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// Adaptive moments with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW<T: Scalar> {
    pub cfg: AdamWConfig,
    pub step: u64,
    m: ParamGrads<T>,
    v: ParamGrads<T>,
}

fn update<T: Scalar>(p: &mut Array2<T>, g: &Array2<T>, m: &mut Array2<T>, v: &mut Array2<T>, c: [T; 7]) {
    let [b1, b2, bc1, bc2, eps, lr, wd] = c;
    let one = T::one();
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *p -= lr * (mhat / (vhat.sqrt() + eps) + wd * *p);
    });
}

impl<T: Scalar> AdamW<T> {
    pub fn new(enc: &DualEncoder<T>, cfg: AdamWConfig) -> Self {
        Self { cfg, step: 0, m: ParamGrads::zeros_for(enc), v: ParamGrads::zeros_for(enc) }
    }

    /// One update. `w0` and the unknown-token vector are never touched; word embeddings
    /// only when `train_words` is set.
    pub fn apply(&mut self, enc: &mut DualEncoder<T>, g: &ParamGrads<T>, lr: f64, train_words: bool) {
        self.step += 1;
        let t = self.step as i32;
        let c = [
            T::of(self.cfg.beta1),
            T::of(self.cfg.beta2),
            T::of(1.0 - self.cfg.beta1.powi(t)),
            T::of(1.0 - self.cfg.beta2.powi(t)),
            T::of(self.cfg.eps),
            T::of(lr),
            T::of(self.cfg.weight_decay),
        ];
        update(&mut enc.a, &g.a, &mut self.m.a, &mut self.v.a, c);
        update(&mut enc.bm, &g.bm, &mut self.m.bm, &mut self.v.bm, c);
        if train_words {
            update(&mut enc.word_emb, &g.word_emb, &mut self.m.word_emb, &mut self.v.word_emb, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(cosine_lr(0, 100, 1e-2, 1e-4), 1e-2);
        assert!((cosine_lr(100, 100, 1e-2, 1e-4) - 1e-4).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 1e-2, 1e-4) - (1e-2 + 1e-4) / 2.0).abs() < 1e-15);
        let lrs: Vec<f64> = (0..=100).map(|s| cosine_lr(s, 100, 1e-2, 1e-4)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = ParamGrads::<f64> {
            a: Array2::from_elem((2, 2), 3.0),
            bm: Array2::from_elem((1, 1), 4.0),
            word_emb: Array2::from_elem((1, 2), 100.0),
        };
        let before = g.clip(1.0, false);
        assert!((before - 52.0f64.sqrt()).abs() < 1e-12);
        assert!((g.norm(false) - 1.0).abs() < 1e-12);
    }
}
