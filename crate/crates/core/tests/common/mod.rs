#![allow(dead_code)]

pub mod cli;

use std::collections::HashSet;

use hoi_core::corpus::{CaptionRecord, SynonymDict};
use hoi_core::negmine::NegativeBundle;
use hoi_core::objectives::{EmbeddingBatch, Grads};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    hoi_core::seed::rng(seed, "tests", 0)
}

pub fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, d), |_| rng.sample::<f64, _>(StandardNormal));
    for mut r in m.rows_mut() {
        let n = r.dot(&r).sqrt();
        r /= n;
    }
    m
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random batch with every optional block filled: aug blocks of `b` rows and up to `k` negatives per row.
pub fn random_batch(rng: &mut ChaCha8Rng, b: usize, d: usize, k: usize, tau: f64) -> EmbeddingBatch<f64> {
    let negs = (0..b)
        .map(|_| {
            let kk = rng.random_range(0..=k);
            unit_rows(rng, kk, d)
        })
        .collect();
    EmbeddingBatch::new(unit_rows(rng, b, d), unit_rows(rng, b, d), tau)
        .with_aug(unit_rows(rng, b, d), unit_rows(rng, b, d))
        .with_negs(negs)
}

/// Relative error with a floor so that entries that are zero in both agree.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub const FD_EPS: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-3;

fn blocks_mut(b: &mut EmbeddingBatch<f64>) -> Vec<&mut Array2<f64>> {
    let mut out = vec![&mut b.video, &mut b.text];
    if let Some(m) = b.aug_video.as_mut() {
        out.push(m);
    }
    if let Some(m) = b.aug_text.as_mut() {
        out.push(m);
    }
    if let Some(v) = b.neg_text.as_mut() {
        out.extend(v.iter_mut());
    }
    out
}

fn grad_blocks(g: &Grads<f64>) -> Vec<&Array2<f64>> {
    let mut out = vec![&g.video, &g.text];
    if let Some(m) = g.aug_video.as_ref() {
        out.push(m);
    }
    if let Some(m) = g.aug_text.as_ref() {
        out.push(m);
    }
    if let Some(v) = g.neg_text.as_ref() {
        out.extend(v.iter());
    }
    out
}

/// Largest entrywise relative error between `grads` and central differences of `f`
/// over every block present in both the batch and the gradient.
pub fn fd_max_rel(
    batch: &EmbeddingBatch<f64>,
    grads: &Grads<f64>,
    f: impl Fn(&EmbeddingBatch<f64>) -> f64,
) -> f64 {
    let analytic: Vec<Array2<f64>> = grad_blocks(grads).into_iter().cloned().collect();
    let mut work = batch.clone();
    let n_blocks = blocks_mut(&mut work).len();
    assert_eq!(n_blocks, analytic.len(), "gradient blocks must mirror batch blocks");
    let mut worst: f64 = 0.0;
    for bi in 0..n_blocks {
        let shape = analytic[bi].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = blocks_mut(&mut work)[bi][[r, c]];
                blocks_mut(&mut work)[bi][[r, c]] = orig + FD_EPS;
                let up = f(&work);
                blocks_mut(&mut work)[bi][[r, c]] = orig - FD_EPS;
                let down = f(&work);
                blocks_mut(&mut work)[bi][[r, c]] = orig;
                let num = (up - down) / (2.0 * FD_EPS);
                worst = worst.max(rel_err(analytic[bi][[r, c]], num, REL_FLOOR));
            }
        }
    }
    worst
}

/// Keep only the blocks that a loss actually differentiates.
pub fn strip(batch: &EmbeddingBatch<f64>, aug: bool, negs: bool) -> EmbeddingBatch<f64> {
    let mut b = batch.clone();
    if !aug {
        b.aug_video = None;
        b.aug_text = None;
    }
    if !negs {
        b.neg_text = None;
    }
    b
}

use hoi_core::experiment::{prepare, Prepared};
use hoi_core::model::{batch_loss, DualEncoder, ModelConfig, Objective, SampledBatch, TrainConfig, TrainData};
use hoi_core::synth::SynthConfig;

/// A small synthetic problem for pipeline-level checks.
pub struct Tiny {
    pub prep: Prepared,
    pub data: TrainData<f64>,
    pub enc: DualEncoder<f64>,
    pub cfg: TrainConfig,
    pub batch: SampledBatch,
}

/// Random tiny pipeline instance: B <= 8, d <= 16, K <= 4, adapter factors both non-zero.
pub fn tiny(seed: u64, objective: Objective) -> Tiny {
    tiny_with(seed, objective, |_, _| {})
}

/// [`tiny`] with the drawn synthetic and model configs adjusted by `tweak`.
pub fn tiny_with(seed: u64, objective: Objective, tweak: impl FnOnce(&mut SynthConfig, &mut ModelConfig)) -> Tiny {
    let mut r = rng(seed);
    let mut syn = SynthConfig {
        n_verbs: 8,
        n_nouns: 8,
        n_scenes: 3,
        n_train: 48,
        n_bench: 8,
        feature_dim: r.random_range(3..=8),
        seed,
        ..SynthConfig::default()
    };
    let k = r.random_range(1..=4);
    let mut mcfg = ModelConfig {
        dim: r.random_range(2..=16),
        rank: r.random_range(1..=4),
        alpha: r.random_range(0.5..4.0),
        tau: r.random_range(0.2..1.0),
    };
    tweak(&mut syn, &mut mcfg);
    let prep = prepare(&syn, k, 2).unwrap();
    let mut enc = prep.init_encoder::<f64>(&mcfg, seed).unwrap();
    enc.bm.mapv_inplace(|_| 0.3 * r.sample::<f64, _>(StandardNormal));
    enc.a.mapv_inplace(|_| 0.3 * r.sample::<f64, _>(StandardNormal));
    let data = prep.train_data::<f64>().unwrap();
    let cfg = TrainConfig {
        batch_size: r.random_range(2..=8),
        objective,
        negatives_per_type: k,
        ..TrainConfig::default()
    };
    let batch = data.sampler().sample(cfg.batch_size, objective == Objective::EgoNce, seed).unwrap();
    Tiny { prep, data, enc, cfg, batch }
}

/// Largest relative error between the analytic parameter gradient of `batch_loss` and
/// central differences, over every entry of `a`, `bm` and `word_emb`.
pub fn pipeline_fd_max_rel(t: &Tiny) -> f64 {
    let (_, g) = batch_loss(&t.enc, &t.data, &t.batch, &t.cfg).unwrap();
    let loss = |e: &DualEncoder<f64>| batch_loss(e, &t.data, &t.batch, &t.cfg).unwrap().0;
    let mut work = t.enc.clone();
    let mut worst: f64 = 0.0;
    let mut check = |get: fn(&mut DualEncoder<f64>) -> &mut Array2<f64>, analytic: &Array2<f64>| {
        for ((r, c), &a) in analytic.indexed_iter() {
            let orig = get(&mut work)[[r, c]];
            get(&mut work)[[r, c]] = orig + FD_EPS;
            let up = loss(&work);
            get(&mut work)[[r, c]] = orig - FD_EPS;
            let down = loss(&work);
            get(&mut work)[[r, c]] = orig;
            worst = worst.max(rel_err(a, (up - down) / (2.0 * FD_EPS), REL_FLOOR));
        }
    };
    check(|e| &mut e.a, &g.a);
    check(|e| &mut e.bm, &g.bm);
    check(|e| &mut e.word_emb, &g.word_emb);
    worst
}

/// Average precision of one ranked list of relevance flags, straight from the definition.
pub fn naive_ap(ranked_rel: &[bool]) -> f64 {
    let n_rel = ranked_rel.iter().filter(|&&r| r).count();
    let mut hits = 0;
    let mut total = 0.0;
    for (i, &r) in ranked_rel.iter().enumerate() {
        if r {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    total / n_rel as f64
}

/// Gallery order of one query: score descending, ties by gallery index.
pub fn naive_rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps the oracle free of library sorting
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j]] > scores[order[j - 1]] {
            order.swap(j, j - 1);
            j -= 1;
        }
    }
    order
}

pub fn naive_map(s: &Array2<f64>, rel: &Array2<bool>) -> f64 {
    let mut total = 0.0;
    for q in 0..s.nrows() {
        let order = naive_rank(&s.row(q).to_vec());
        let ranked: Vec<bool> = order.iter().map(|&g| rel[[q, g]]).collect();
        total += naive_ap(&ranked);
    }
    total / s.nrows() as f64
}

fn dcg(gains: &[f64]) -> f64 {
    gains.iter().enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum()
}

pub fn naive_ndcg(s: &Array2<f64>, rel: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for q in 0..s.nrows() {
        let order = naive_rank(&s.row(q).to_vec());
        let gains: Vec<f64> = order.iter().map(|&g| rel[[q, g]]).collect();
        let mut ideal = rel.row(q).to_vec();
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        total += dcg(&gains) / dcg(&ideal);
    }
    total / s.nrows() as f64
}

/// Random positive sets: each index joins a random group, sets are group memberships.
pub fn random_groups(rng: &mut rand_chacha::ChaCha8Rng, n: usize, groups: usize) -> Vec<Vec<usize>> {
    let g: Vec<usize> = (0..n).map(|_| rng.random_range(0..groups)).collect();
    (0..n).map(|i| (0..n).filter(|&j| g[j] == g[i]).collect()).collect()
}

/// Random metric instance with q, g <= 20, coarse scores so that ties occur, and at least
/// one fully relevant item per query.
pub fn metric_instance(seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut r = rng(seed);
    let (q, g) = (r.random_range(1..=20), r.random_range(1..=20));
    let s = Array2::from_shape_fn((q, g), |_| r.random_range(0..6) as f64 / 5.0);
    let mut rel = Array2::from_shape_fn((q, g), |_| [0.0, 0.0, 0.5, 1.0][r.random_range(0..4)]);
    for mut row in rel.rows_mut() {
        if !row.iter().any(|&x| x == 1.0) {
            let j = r.random_range(0..row.len());
            row[j] = 1.0;
        }
    }
    (s, rel)
}

/// Lemmas a single surface word could come from, for regular inflection.
pub fn forms(w: &str) -> Vec<String> {
    let mut out = vec![w.to_string()];
    if let Some(stem) = w.strip_suffix("ies") {
        out.push(format!("{stem}y"));
    }
    if let Some(stem) = w.strip_suffix("es") {
        out.push(stem.to_string());
    }
    if let Some(stem) = w.strip_suffix('s') {
        out.push(stem.to_string());
    }
    out
}

/// Whether `neg` replaces only the word at position `at` of `pos` (possibly by several
/// words) with something that is not a synonym of `lemma`.
pub fn clean_edit(neg: &str, pos: &[&str], at: usize, lemma: &str, dict: &SynonymDict) -> bool {
    let toks: Vec<&str> = neg.split_whitespace().collect();
    let tail = pos.len() - at - 1;
    if toks.len() <= at + tail || toks[..at] != pos[..at] || toks[toks.len() - tail..] != pos[at + 1..] {
        return false;
    }
    let middle = toks[at..toks.len() - tail].join("_");
    middle != pos[at] && !forms(&middle).iter().any(|f| dict.same_class(f, lemma))
}

/// Invariants of a vocab/LLM bundle on a `#C C <verb> the <noun>` caption, checked on raw
/// whitespace tokens (2 is the verb position, 4 the noun): clean edits only, no repeats.
pub fn violations(b: &NegativeBundle, cap: &CaptionRecord, dict: &SynonymDict) -> Vec<String> {
    let pos: Vec<&str> = cap.text.split_whitespace().collect();
    let mut bad = Vec::new();
    for (list, at, lemma) in [(&b.verb_negs, 2, &cap.verb), (&b.noun_negs, 4, &cap.nouns[0])] {
        let mut seen = HashSet::new();
        for neg in list {
            if !(clean_edit(neg, &pos, at, lemma, dict) && seen.insert(neg.clone())) {
                bad.push(neg.clone());
            }
        }
    }
    bad
}
