//! Multi-choice verb/noun trials, their evaluation, and retrieval and embedding diagnostics.

mod analysis;
mod metrics;

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionRecord, FeatureTable, Narrator, SynonymDict};
use crate::model::{DualEncoder, ModelError};
use crate::negmine::{validate_bundle, NegativeBundle};
use crate::{seed, Scalar};

pub use analysis::{separability, similarity_histogram, SimilarityHistogram, SEPARABILITY_CAP};
pub use metrics::{binary_relevance, graded_relevance, retrieval_map, retrieval_ndcg};

/// Candidates of each kind per trial.
pub const DEFAULT_N: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no trials to evaluate")]
    EmptyTrialSet,
    #[error("query {0} has no relevant gallery item")]
    QueryWithoutRelevant(usize),
    #[error("degenerate classes: {0}")]
    DegenerateClasses(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("histogram needs at least 2 bins, got {0}")]
    InvalidBins(usize),
    #[error("no feature for clip {0:?}")]
    MissingFeature(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}:{line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One clip with its ground-truth caption and `N` verb-swapped and `N` noun-swapped candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub clip_id: String,
    pub positive: String,
    pub verb_candidates: Vec<String>,
    pub noun_candidates: Vec<String>,
}

fn subselect(list: Vec<String>, n: usize, seed_: u64, label: &str) -> Vec<String> {
    if list.len() <= n {
        return list;
    }
    let mut rng = seed::rng(seed_, label, 0);
    let mut pick = rand::seq::index::sample(&mut rng, list.len(), n).into_vec();
    pick.sort_unstable();
    pick.into_iter().map(|i| list[i].clone()).collect()
}

/// Trials for every wearer-narrated caption whose validated bundle has at least `n`
/// negatives of each kind. Returns the trials and the number of captions skipped for
/// lack of negatives (missing bundles included).
pub fn build_trials(
    captions: &[CaptionRecord],
    bundles: &[NegativeBundle],
    n: usize,
    dict: &SynonymDict,
    seed_: u64,
) -> (Vec<Trial>, usize) {
    let by_id: HashMap<&str, &NegativeBundle> = bundles.iter().map(|b| (b.caption_id.as_str(), b)).collect();
    let mut trials = Vec::new();
    let mut skipped = 0;
    for cap in captions.iter().filter(|c| c.narrator == Narrator::Wearer) {
        let Some(bundle) = by_id.get(cap.caption_id.as_str()) else {
            skipped += 1;
            continue;
        };
        let clean = validate_bundle(bundle, cap, dict).bundle;
        if clean.verb_negs.len() < n || clean.noun_negs.len() < n {
            skipped += 1;
            continue;
        }
        let s = seed::derive(seed_, &cap.caption_id, 0);
        trials.push(Trial {
            clip_id: cap.clip_id.clone(),
            positive: cap.text.clone(),
            verb_candidates: subselect(clean.verb_negs, n, s, "verb"),
            noun_candidates: subselect(clean.noun_negs, n, s, "noun"),
        });
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} captions with fewer than {n} valid negatives of a kind");
    }
    (trials, skipped)
}

pub fn write_trials(path: &Path, trials: &[Trial]) -> Result<(), BenchError> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    for t in trials {
        serde_json::to_writer(&mut f, t).expect("trial serialises");
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<Trial>, BenchError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| BenchError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub verb_ok: bool,
    pub noun_ok: bool,
    pub action_ok: bool,
}

/// Cosine similarity of the clip to its positive and to every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    pub positive: f64,
    pub verb: Vec<f64>,
    pub noun: Vec<f64>,
}

impl TrialScores {
    /// Strict comparison: a tie with any candidate counts as a miss.
    pub fn outcome(&self) -> TrialOutcome {
        let verb_ok = self.verb.iter().all(|&s| self.positive > s);
        let noun_ok = self.noun.iter().all(|&s| self.positive > s);
        TrialOutcome { verb_ok, noun_ok, action_ok: verb_ok && noun_ok }
    }
}

pub fn score_trial<T: Scalar>(enc: &DualEncoder<T>, video: &Array1<T>, trial: &Trial) -> Result<TrialScores, BenchError> {
    let sim = |text: &str| -> Result<f64, BenchError> { Ok(enc.encode_caption(text)?.dot(video).as_f64()) };
    Ok(TrialScores {
        positive: sim(&trial.positive)?,
        verb: trial.verb_candidates.iter().map(|c| sim(c)).collect::<Result<_, _>>()?,
        noun: trial.noun_candidates.iter().map(|c| sim(c)).collect::<Result<_, _>>()?,
    })
}

fn clip_embedding<T: Scalar>(enc: &DualEncoder<T>, features: &FeatureTable, clip_id: &str) -> Result<Array1<T>, BenchError> {
    let row = features.get(clip_id).ok_or_else(|| BenchError::MissingFeature(clip_id.to_string()))?;
    let x = Array1::from_iter(row.iter().map(|&v| T::of(v as f64)));
    Ok(enc.encode_video(x.view())?)
}

pub fn trial_scores<T: Scalar>(enc: &DualEncoder<T>, features: &FeatureTable, trial: &Trial) -> Result<TrialScores, BenchError> {
    score_trial(enc, &clip_embedding(enc, features, &trial.clip_id)?, trial)
}

pub fn eval_trial<T: Scalar>(enc: &DualEncoder<T>, clip_feature: &[f32], trial: &Trial) -> Result<TrialOutcome, BenchError> {
    let x = Array1::from_iter(clip_feature.iter().map(|&v| T::of(v as f64)));
    let v = enc.encode_video(x.view())?;
    Ok(score_trial(enc, &v, trial)?.outcome())
}

/// Aggregate accuracies. Only the four summary fields are serialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub verb_acc: f64,
    pub noun_acc: f64,
    pub action_acc: f64,
    pub n_trials: usize,
    #[serde(skip)]
    pub per_trial: Vec<TrialOutcome>,
}

impl BenchReport {
    pub fn from_outcomes(per_trial: Vec<TrialOutcome>) -> Result<Self, BenchError> {
        if per_trial.is_empty() {
            return Err(BenchError::EmptyTrialSet);
        }
        let n = per_trial.len() as f64;
        let frac = |f: fn(&TrialOutcome) -> bool| per_trial.iter().filter(|o| f(o)).count() as f64 / n;
        Ok(Self {
            verb_acc: frac(|o| o.verb_ok),
            noun_acc: frac(|o| o.noun_ok),
            action_acc: frac(|o| o.action_ok),
            n_trials: per_trial.len(),
            per_trial,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), BenchError> {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Evaluate every trial, splitting the work over `threads` workers. The result does not
/// depend on the thread count.
pub fn eval_bench<T: Scalar>(
    enc: &DualEncoder<T>,
    features: &FeatureTable,
    trials: &[Trial],
    threads: usize,
) -> Result<BenchReport, BenchError> {
    if trials.is_empty() {
        return Err(BenchError::EmptyTrialSet);
    }
    let threads = threads.clamp(1, trials.len());
    let chunk = trials.len().div_ceil(threads);
    let parts: Vec<Result<Vec<TrialOutcome>, BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = trials
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || part.iter().map(|t| Ok(trial_scores(enc, features, t)?.outcome())).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut outcomes = Vec::with_capacity(trials.len());
    for p in parts {
        outcomes.extend(p?);
    }
    BenchReport::from_outcomes(outcomes)
}
