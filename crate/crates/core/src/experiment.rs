//! In-memory end-to-end pipeline: synthesise, mine, build trials, train, evaluate.

use ndarray::Array2;
use serde::Serialize;

use crate::bench::{
    binary_relevance, build_trials, eval_bench, graded_relevance, retrieval_map, retrieval_ndcg, separability,
    similarity_histogram, BenchReport, SimilarityHistogram, Trial, SEPARABILITY_CAP,
};
use crate::corpus::{CaptionRecord, FeatureTable};
use crate::model::{train, DualEncoder, ModelConfig, StepMetrics, TrainConfig, TrainData, Vocab};
use crate::negmine::{mine_vocab_batch, NegativeBundle};
use crate::synth::{gen_corpus, split_bench, SynthConfig, SynthCorpus};
use crate::{seed, Error, Scalar};

/// Everything derived from one synthetic corpus before training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: SynthCorpus,
    pub table: FeatureTable,
    pub train_caps: Vec<CaptionRecord>,
    pub bench_caps: Vec<CaptionRecord>,
    pub train_bundles: Vec<NegativeBundle>,
    pub bench_bundles: Vec<NegativeBundle>,
    pub trials: Vec<Trial>,
    pub vocab: Vocab,
}

/// Generate the corpus, mine `k` vocab negatives per type for training captions,
/// and build `n`-way trials for the bench split.
pub fn prepare(cfg: &SynthConfig, k: usize, n: usize) -> Result<Prepared, Error> {
    let corpus = gen_corpus(cfg)?;
    let split = split_bench(corpus.captions.len(), cfg)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus.captions[i].clone()).collect::<Vec<_>>();
    let train_caps = pick(&split.train);
    let bench_caps = pick(&split.bench);
    let dict = &corpus.synonyms;
    let train_bundles =
        mine_vocab_batch(&train_caps, &corpus.verbs, &corpus.nouns, dict, k, seed::derive(cfg.seed, "mine", 0))?;
    let bench_bundles =
        mine_vocab_batch(&bench_caps, &corpus.verbs, &corpus.nouns, dict, n, seed::derive(cfg.seed, "mine", 1))?;
    let (trials, _) = build_trials(&bench_caps, &bench_bundles, n, dict, seed::derive(cfg.seed, "trials", 0));
    let vocab = Vocab::from_texts(train_caps.iter().map(|c| c.text.as_str()));
    let table = corpus.feature_table();
    Ok(Prepared { corpus, table, train_caps, bench_caps, train_bundles, bench_bundles, trials, vocab })
}

impl Prepared {
    pub fn train_data<T: Scalar>(&self) -> Result<TrainData<T>, Error> {
        Ok(TrainData::new(
            self.train_caps.clone(),
            &self.table,
            &self.train_bundles,
            &self.vocab,
            self.corpus.synonyms.clone(),
        )?)
    }

    pub fn init_encoder<T: Scalar>(&self, cfg: &ModelConfig, seed_: u64) -> Result<DualEncoder<T>, Error> {
        Ok(DualEncoder::init(cfg, self.table.dim(), self.vocab.clone(), seed_)?)
    }
}

/// Train without per-step callbacks.
pub fn fit<T: Scalar>(
    enc: DualEncoder<T>,
    data: &TrainData<T>,
    cfg: &TrainConfig,
) -> Result<(DualEncoder<T>, Vec<StepMetrics>), Error> {
    Ok(train(enc, data, cfg, |_, _| Ok(()))?)
}

/// Separability of caption and clip embeddings under verb labels and noun labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparabilityScores {
    pub text_verb: f64,
    pub text_noun: f64,
    pub video_verb: f64,
    pub video_noun: f64,
}

/// Caption and clip embeddings of `caps`, row-aligned.
fn embed_pairs<T: Scalar>(
    enc: &DualEncoder<T>,
    caps: &[CaptionRecord],
    table: &FeatureTable,
) -> Result<(Array2<T>, Array2<T>), Error> {
    let tokens: Vec<Vec<u32>> = caps.iter().map(|c| enc.vocab.encode(&c.text)).collect();
    let refs: Vec<&[u32]> = tokens.iter().map(Vec::as_slice).collect();
    let text = enc.forward_texts(&refs)?.out;
    let mut x = Array2::<T>::zeros((caps.len(), table.dim()));
    for (i, c) in caps.iter().enumerate() {
        let row = table.get(&c.clip_id).ok_or_else(|| Error::Data(format!("no feature for {}", c.clip_id)))?;
        for (d, &s) in x.row_mut(i).iter_mut().zip(row) {
            *d = T::of(s as f64);
        }
    }
    Ok((text, enc.forward_videos(&x)?.out))
}

pub fn separability_scores<T: Scalar>(
    enc: &DualEncoder<T>,
    caps: &[CaptionRecord],
    table: &FeatureTable,
    seed_: u64,
) -> Result<SeparabilityScores, Error> {
    let (text, video) = embed_pairs(enc, caps, table)?;
    let verbs: Vec<&str> = caps.iter().map(|c| c.verb.as_str()).collect();
    let nouns: Vec<&str> = caps.iter().map(|c| c.nouns.first().map_or("", String::as_str)).collect();
    Ok(SeparabilityScores {
        text_verb: separability(&text, &verbs, SEPARABILITY_CAP, seed_)?,
        text_noun: separability(&text, &nouns, SEPARABILITY_CAP, seed_)?,
        video_verb: separability(&video, &verbs, SEPARABILITY_CAP, seed_)?,
        video_noun: separability(&video, &nouns, SEPARABILITY_CAP, seed_)?,
    })
}

/// Bench accuracy, separability and similarity histogram of one encoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub report: BenchReport,
    pub separability: SeparabilityScores,
    pub histogram: SimilarityHistogram,
}

pub fn evaluate<T: Scalar>(enc: &DualEncoder<T>, prep: &Prepared, threads: usize) -> Result<Evaluation, Error> {
    Ok(Evaluation {
        report: eval_bench(enc, &prep.table, &prep.trials, threads)?,
        separability: separability_scores(enc, &prep.bench_caps, &prep.table, 0)?,
        histogram: similarity_histogram(enc, &prep.table, &prep.trials, 50)?,
    })
}

/// Stage-one InfoNCE training from a fresh encoder, then the adapter is folded into
/// the frozen weight and re-initialised. The result is the base model that stage-two
/// objectives are compared from.
pub fn pretrain_base<T: Scalar>(
    prep: &Prepared,
    data: &TrainData<T>,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<DualEncoder<T>, Error> {
    let enc = prep.init_encoder(mcfg, tcfg.seed)?;
    let cfg = TrainConfig { objective: crate::model::Objective::InfoNce, ..tcfg.clone() };
    let (mut base, _) = fit(enc, data, &cfg)?;
    base.merge_adapter(tcfg.seed);
    Ok(base)
}

/// Multi-instance retrieval between clips and captions of one split. A gallery item is
/// relevant for mAP when verb and noun classes both match; nDCG uses the graded score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub v2t_map: f64,
    pub t2v_map: f64,
    pub avg_map: f64,
    pub v2t_ndcg: f64,
    pub t2v_ndcg: f64,
    pub avg_ndcg: f64,
    pub n_items: usize,
}

pub fn retrieval<T: Scalar>(
    enc: &DualEncoder<T>,
    caps: &[CaptionRecord],
    table: &FeatureTable,
    dict: &crate::corpus::SynonymDict,
) -> Result<RetrievalReport, Error> {
    let (text, video) = embed_pairs(enc, caps, table)?;
    let s: Array2<f64> = video.dot(&text.t()).mapv(|x| x.to_f64().expect("finite scalar"));
    let graded = graded_relevance(caps, caps, dict);
    let binary = binary_relevance(&graded);
    let st = s.t().to_owned();
    let (gt, bt) = (graded.t().to_owned(), binary.t().to_owned());
    let v2t_map = retrieval_map(&s, &binary)?;
    let t2v_map = retrieval_map(&st, &bt)?;
    let v2t_ndcg = retrieval_ndcg(&s, &graded, None)?;
    let t2v_ndcg = retrieval_ndcg(&st, &gt, None)?;
    Ok(RetrievalReport {
        v2t_map,
        t2v_map,
        avg_map: 0.5 * (v2t_map + t2v_map),
        v2t_ndcg,
        t2v_ndcg,
        avg_ndcg: 0.5 * (v2t_ndcg + t2v_ndcg),
        n_items: caps.len(),
    })
}
