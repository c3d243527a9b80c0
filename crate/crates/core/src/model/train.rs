use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdamW, AdamWConfig, DualEncoder, ModelError, ParamGrads, Vocab};
use crate::corpus::{CaptionRecord, FeatureTable, SynonymDict};
use crate::negmine::NegativeBundle;
use crate::objectives::{
    ego_nce, egoncepp_t2v, egoncepp_total, egoncepp_v2t, info_nce, info_nce_t2v, info_nce_v2t, make_pos_sets,
    EmbeddingBatch, LossValue, PosMode,
};
use crate::{seed, Scalar};

use super::optim::cosine_lr;

/// Which loss drives each direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "infonce")]
    InfoNce,
    #[serde(rename = "egonce")]
    EgoNce,
    #[serde(rename = "egoncepp")]
    EgoNcePP,
    /// EgoNCE++ video-to-text with InfoNCE text-to-video.
    #[serde(rename = "v2t-only")]
    V2tOnly,
    /// InfoNCE video-to-text with EgoNCE++ text-to-video.
    #[serde(rename = "t2v-only")]
    T2vOnly,
}

impl Objective {
    pub const ALL: [Objective; 5] =
        [Objective::InfoNce, Objective::EgoNce, Objective::EgoNcePP, Objective::V2tOnly, Objective::T2vOnly];

    pub fn name(self) -> &'static str {
        match self {
            Objective::InfoNce => "infonce",
            Objective::EgoNce => "egonce",
            Objective::EgoNcePP => "egoncepp",
            Objective::V2tOnly => "v2t-only",
            Objective::T2vOnly => "t2v-only",
        }
    }

    pub fn uses_negatives(self) -> bool {
        matches!(self, Objective::EgoNcePP | Objective::V2tOnly)
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown objective {s:?}"))
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub seed: u64,
    pub objective: Objective,
    /// Verb negatives and noun negatives used per caption (each).
    pub negatives_per_type: usize,
    /// Draw a same-scene partner for every sample (needed by EgoNCE).
    pub scene_paired: bool,
    pub grad_clip: f64,
    pub freeze_word_emb: bool,
    pub adamw: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 10,
            lr0: 1e-2,
            lr_min: 1e-4,
            seed: 0,
            objective: Objective::InfoNce,
            negatives_per_type: 10,
            scene_paired: true,
            grad_clip: 1.0,
            freeze_word_emb: false,
            adamw: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size < 2 {
            return Err(ModelError::InvalidConfig("batch_size must be >= 2".into()));
        }
        if !(self.lr0.is_finite() && self.lr_min.is_finite() && self.lr0 >= 0.0 && self.lr_min >= 0.0) {
            return Err(ModelError::InvalidConfig("learning rates must be finite and >= 0".into()));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(ModelError::InvalidConfig("grad_clip must be finite and >= 0 (0 disables)".into()));
        }
        if self.objective == Objective::EgoNce && !self.scene_paired {
            return Err(ModelError::InvalidConfig("egonce needs scene_paired = true".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// Training samples with their features, token ids, scenes and (optional) negatives.
#[derive(Debug, Clone)]
pub struct TrainData<T: Scalar> {
    pub features: Array2<T>,
    pub captions: Vec<CaptionRecord>,
    pub tokens: Vec<Vec<u32>>,
    pub verb_negs: Vec<Vec<Vec<u32>>>,
    pub noun_negs: Vec<Vec<Vec<u32>>>,
    pub dict: SynonymDict,
    sampler: Sampler,
}

impl<T: Scalar> TrainData<T> {
    /// Join captions with their clip features and negative bundles (matched by caption id).
    /// Captions without a bundle train with no negatives.
    pub fn new(
        captions: Vec<CaptionRecord>,
        table: &FeatureTable,
        bundles: &[NegativeBundle],
        vocab: &Vocab,
        dict: SynonymDict,
    ) -> Result<Self, ModelError> {
        if captions.is_empty() {
            return Err(ModelError::Data("no training captions".into()));
        }
        let mut features = Array2::zeros((captions.len(), table.dim()));
        for (i, c) in captions.iter().enumerate() {
            let row = table
                .get(&c.clip_id)
                .ok_or_else(|| ModelError::Data(format!("no feature for clip {:?}", c.clip_id)))?;
            for (dst, &src) in features.row_mut(i).iter_mut().zip(row) {
                *dst = T::of(src as f64);
            }
        }
        let by_id: HashMap<&str, &NegativeBundle> = bundles.iter().map(|b| (b.caption_id.as_str(), b)).collect();
        let enc_all = |v: &[String]| v.iter().map(|t| vocab.encode(t)).collect::<Vec<_>>();
        let (verb_negs, noun_negs) = captions
            .iter()
            .map(|c| match by_id.get(c.caption_id.as_str()) {
                Some(b) => (enc_all(&b.verb_negs), enc_all(&b.noun_negs)),
                None => (Vec::new(), Vec::new()),
            })
            .unzip();
        let tokens = captions.iter().map(|c| vocab.encode(&c.text)).collect();
        let sampler = Sampler::new(&captions);
        Ok(Self { features, captions, tokens, verb_negs, noun_negs, dict, sampler })
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }
}

/// Indices of one batch and, when scene pairing is on, a same-scene partner for each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledBatch {
    pub idx: Vec<usize>,
    pub paired: Option<Vec<usize>>,
    /// Samples whose scene had no other clip and were paired with themselves.
    pub fallbacks: usize,
}

/// Scene membership used to draw batches.
#[derive(Debug, Clone)]
pub struct Sampler {
    scene_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Sampler {
    pub fn new(captions: &[CaptionRecord]) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut scene_of = Vec::with_capacity(captions.len());
        for (i, c) in captions.iter().enumerate() {
            let next = ids.len();
            let s = *ids.entry(c.scene_id.as_str()).or_insert(next);
            if s == members.len() {
                members.push(Vec::new());
            }
            members[s].push(i);
            scene_of.push(s);
        }
        Self { scene_of, members }
    }

    pub fn len(&self) -> usize {
        self.scene_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene_of.is_empty()
    }

    /// `b` distinct indices drawn uniformly; with `scene_paired`, each gets a different
    /// clip from the same scene, or itself when the scene has only one clip.
    pub fn sample(&self, b: usize, scene_paired: bool, seed: u64) -> Result<SampledBatch, ModelError> {
        let n = self.len();
        if b > n {
            return Err(ModelError::BatchTooLarge { batch: b, available: n });
        }
        let mut rng = seed::rng(seed, "batch", 0);
        let idx = sample(&mut rng, n, b).into_vec();
        if !scene_paired {
            return Ok(SampledBatch { idx, paired: None, fallbacks: 0 });
        }
        let mut fallbacks = 0;
        let paired = idx
            .iter()
            .map(|&i| {
                let m = &self.members[self.scene_of[i]];
                if m.len() < 2 {
                    fallbacks += 1;
                    return i;
                }
                let k = rng.random_range(0..m.len() - 1);
                let pos = m.binary_search(&i).expect("member of own scene");
                m[if k >= pos { k + 1 } else { k }]
            })
            .collect();
        if fallbacks > 0 {
            log::warn!("{fallbacks} samples had no same-scene partner and were paired with themselves");
        }
        Ok(SampledBatch { idx, paired: Some(paired), fallbacks })
    }
}

pub fn sample_batch(data_scenes: &Sampler, b: usize, scene_paired: bool, seed: u64) -> Result<SampledBatch, ModelError> {
    data_scenes.sample(b, scene_paired, seed)
}

fn combine<T: Scalar>(a: LossValue<T>, b: LossValue<T>) -> LossValue<T> {
    a.add(b)
}

/// Loss of one batch and its gradient with respect to every trainable parameter.
pub fn batch_loss<T: Scalar>(
    enc: &DualEncoder<T>,
    data: &TrainData<T>,
    batch: &SampledBatch,
    cfg: &TrainConfig,
) -> Result<(T, ParamGrads<T>), ModelError> {
    let b = batch.idx.len();
    let obj = cfg.objective;
    let aug = match (obj, &batch.paired) {
        (Objective::EgoNce, Some(p)) => Some(p),
        (Objective::EgoNce, None) => return Err(ModelError::InvalidConfig("egonce needs a scene-paired batch".into())),
        _ => None,
    };

    let mut vid_idx = batch.idx.clone();
    let mut txt: Vec<&[u32]> = batch.idx.iter().map(|&i| data.tokens[i].as_slice()).collect();
    if let Some(p) = aug {
        vid_idx.extend_from_slice(p);
        txt.extend(p.iter().map(|&i| data.tokens[i].as_slice()));
    }
    let mut neg_counts = Vec::new();
    if obj.uses_negatives() {
        let k = cfg.negatives_per_type;
        for &i in &batch.idx {
            let before = txt.len();
            txt.extend(data.verb_negs[i].iter().take(k).map(Vec::as_slice));
            txt.extend(data.noun_negs[i].iter().take(k).map(Vec::as_slice));
            neg_counts.push(txt.len() - before);
        }
    }

    let x = data.features.select(Axis(0), &vid_idx);
    let venc = enc.forward_videos(&x)?;
    let tenc = enc.forward_texts(&txt)?;
    let v = &venc.out;
    let t = &tenc.out;

    let mut eb = EmbeddingBatch::new(v.slice(s![..b, ..]).to_owned(), t.slice(s![..b, ..]).to_owned(), enc.tau);
    if aug.is_some() {
        eb = eb.with_aug(v.slice(s![b.., ..]).to_owned(), t.slice(s![b..2 * b, ..]).to_owned());
    }
    if obj.uses_negatives() {
        let mut at = b;
        let negs = neg_counts
            .iter()
            .map(|&c| {
                let m = t.slice(s![at..at + c, ..]).to_owned();
                at += c;
                m
            })
            .collect();
        eb = eb.with_negs(negs);
    }

    let main_caps: Vec<&CaptionRecord> = batch.idx.iter().map(|&i| &data.captions[i]).collect();
    let lv = match obj {
        Objective::InfoNce => info_nce(&eb)?,
        Objective::EgoNce => {
            let mut caps = main_caps.clone();
            caps.extend(aug.expect("checked above").iter().map(|&i| &data.captions[i]));
            ego_nce(&eb, &make_pos_sets(&caps, PosMode::VerbOrNoun, &data.dict))?
        }
        Objective::EgoNcePP => egoncepp_total(&eb, &make_pos_sets(&main_caps, PosMode::NounOnly, &data.dict))?,
        Objective::V2tOnly => combine(egoncepp_v2t(&eb)?, info_nce_t2v(&eb)?),
        Objective::T2vOnly => {
            combine(info_nce_v2t(&eb)?, egoncepp_t2v(&eb, &make_pos_sets(&main_caps, PosMode::NounOnly, &data.dict))?)
        }
    };

    let g = lv.grads;
    let dv = match g.aug_video {
        Some(av) => concatenate(Axis(0), &[g.video.view(), av.view()]).expect("same width"),
        None => g.video,
    };
    let mut dt_blocks = vec![g.text];
    if let Some(at) = g.aug_text {
        dt_blocks.push(at);
    }
    if let Some(n) = g.neg_text {
        dt_blocks.extend(n);
    }
    let views: Vec<_> = dt_blocks.iter().map(|m| m.view()).collect();
    let dt = concatenate(Axis(0), &views).expect("same width");
    debug_assert_eq!(dt.nrows(), txt.len());

    let (d_a, d_bm) = enc.backward_videos(&x, &venc, &dv);
    let mut d_emb = Array2::zeros(enc.word_emb.raw_dim());
    enc.backward_texts(&txt, &tenc, &dt, &mut d_emb);
    Ok((lv.value, ParamGrads { a: d_a, bm: d_bm, word_emb: d_emb }))
}

/// Metrics of one optimisation step, also the training-log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Forward, backward, clip and update on one batch.
pub fn train_step<T: Scalar>(
    enc: &mut DualEncoder<T>,
    opt: &mut AdamW<T>,
    data: &TrainData<T>,
    batch: &SampledBatch,
    cfg: &TrainConfig,
    step: usize,
    lr: f64,
) -> Result<StepMetrics, ModelError> {
    let (loss, mut grads) = batch_loss(enc, data, batch, cfg)?;
    let train_words = !cfg.freeze_word_emb;
    let grad_norm = grads.clip(T::of(cfg.grad_clip), train_words);
    let (loss, grad_norm) = (loss.as_f64(), grad_norm.as_f64());
    if !loss.is_finite() || !grad_norm.is_finite() {
        return Err(ModelError::NonFiniteLoss { step, loss, grad_norm });
    }
    opt.apply(enc, &grads, lr, train_words);
    Ok(StepMetrics { step, lr, loss, grad_norm })
}

/// Run `epochs * ceil(n / batch_size)` steps. `on_step` sees the encoder after every step.
pub fn train<T: Scalar>(
    mut enc: DualEncoder<T>,
    data: &TrainData<T>,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&DualEncoder<T>, &StepMetrics) -> Result<(), ModelError>,
) -> Result<(DualEncoder<T>, Vec<StepMetrics>), ModelError> {
    cfg.validate()?;
    let paired = cfg.scene_paired && cfg.objective == Objective::EgoNce;
    let total = cfg.epochs * cfg.steps_per_epoch(data.len());
    let mut opt = AdamW::new(&enc, cfg.adamw);
    let mut log = Vec::with_capacity(total);
    for step in 0..total {
        let lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min);
        let batch = data.sampler.sample(cfg.batch_size, paired, seed::derive(cfg.seed, "step", step as u64))?;
        let m = train_step(&mut enc, &mut opt, data, &batch, cfg, step, lr)?;
        on_step(&enc, &m)?;
        log.push(m);
    }
    Ok((enc, log))
}
