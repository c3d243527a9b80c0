//! Synthetic caption/feature corpora with controllable verb, noun and scene signal.
//!
//! Each clip feature is `verb_snr*u_v + noun_snr*w_n + scene_snr*z_s + noise`,
//! with one fixed random unit direction per class.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{s_form, CaptionRecord, ClipRecord, FeatureTable, Lexicon, SlotKind, SynonymDict};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("cannot cover {needed} classes with {available} training samples")]
    CoverageImpossible { needed: usize, available: usize },
    #[error("split needs {need} samples, corpus has {have}")]
    InsufficientData { have: usize, need: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_verbs: usize,
    pub n_nouns: usize,
    pub n_scenes: usize,
    pub n_train: usize,
    pub n_bench: usize,
    pub feature_dim: usize,
    pub verb_snr: f64,
    pub noun_snr: f64,
    pub scene_snr: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_verbs: 40,
            n_nouns: 150,
            n_scenes: 20,
            n_train: 20_000,
            n_bench: 2_000,
            feature_dim: 128,
            verb_snr: 0.5,
            noun_snr: 1.3,
            scene_snr: 0.5,
            noise_sigma: 0.15,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let counts = [
            ("n_verbs", self.n_verbs),
            ("n_nouns", self.n_nouns),
            ("n_scenes", self.n_scenes),
            ("n_train", self.n_train),
            ("n_bench", self.n_bench),
            ("feature_dim", self.feature_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(SynthError::InvalidConfig(format!("{name} must be >= 1")));
        }
        let reals = [
            ("verb_snr", self.verb_snr),
            ("noun_snr", self.noun_snr),
            ("scene_snr", self.scene_snr),
            ("noise_sigma", self.noise_sigma),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(SynthError::InvalidConfig(format!("{name} must be finite and >= 0")));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_bench
    }
}

/// Output of [`gen_corpus`]. Row `i` of `captions` and `clips` describe the same sample.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub captions: Vec<CaptionRecord>,
    pub clips: Vec<ClipRecord>,
    pub verbs: Lexicon,
    pub nouns: Lexicon,
    pub synonyms: SynonymDict,
    /// Class directions (unit norm), indexed like the generated word lists.
    pub verb_dirs: Vec<Vec<f64>>,
    pub noun_dirs: Vec<Vec<f64>>,
    pub scene_dirs: Vec<Vec<f64>>,
    /// Latent (verb, noun, scene) class of every sample.
    pub labels: Vec<(usize, usize, usize)>,
}

impl SynthCorpus {
    pub fn feature_table(&self) -> FeatureTable {
        let dim = self.clips.first().map_or(0, |c| c.feature.len());
        let mut t = FeatureTable::new(dim);
        for c in &self.clips {
            t.push(c.clip_id.clone(), &c.feature)
                .expect("generated features are finite and unique");
        }
        t
    }
}

const VERBS: &[&str] = &[
    "open", "close", "cut", "pick", "put", "wash", "stir", "pour", "hold", "lift", "drop",
    "turn", "push", "pull", "wipe", "fold", "peel", "slice", "shake", "scrub", "rinse", "fill",
    "tighten", "loosen", "squeeze", "sweep", "scoop", "spread", "flip", "grab", "throw",
    "carry", "mix", "knead", "chop", "grate", "roll", "paint", "measure", "tie", "untie",
    "plug", "unplug", "insert", "remove", "adjust", "touch", "tap", "rub", "dip", "hang",
    "stack", "arrange", "break", "crack", "sprinkle", "unwrap", "wrap", "twist", "bend",
];

const NOUNS: &[&str] = &[
    "drawer", "bottle", "cup", "plate", "bowl", "knife", "spoon", "fork", "pan", "pot", "lid",
    "towel", "sponge", "onion", "tomato", "carrot", "potato", "apple", "egg", "bread", "dough",
    "flour", "sugar", "salt", "butter", "cheese", "milk", "rice", "pasta", "bag", "box", "jar",
    "tray", "board", "cloth", "brush", "bucket", "broom", "mop", "door", "window", "faucet",
    "sink", "table", "chair", "shelf", "cabinet", "fridge", "oven", "kettle", "mug", "glass",
    "bin", "paper", "book", "pen", "phone", "laptop", "key", "wallet", "shoe", "sock", "shirt",
    "jacket", "hat", "glove", "rope", "wire", "cable", "screw", "nail", "bolt", "wrench",
    "screwdriver", "plank", "brick", "tile", "pipe", "hose", "pepper", "lemon", "banana",
    "grape", "cucumber", "lettuce", "garlic", "ginger", "noodle", "sauce", "oil", "vinegar",
    "basket", "blanket", "pillow", "curtain", "lamp", "remote", "charger", "scissors", "tape",
    "glue", "ruler", "pencil", "notebook", "envelope", "bicycle", "wheel", "tyre", "helmet",
    "ladder", "bench", "fence", "shovel", "rake", "leaf", "flower", "soil", "seed", "grass",
];

/// `n` distinct lowercase words for a slot; built-in list first, then numbered fillers.
pub fn class_words(kind: SlotKind, n: usize) -> Vec<String> {
    let (base, prefix) = match kind {
        SlotKind::Verb => (VERBS, "verb"),
        SlotKind::Noun => (NOUNS, "noun"),
    };
    (0..n)
        .map(|i| match base.get(i) {
            Some(w) => w.to_string(),
            None => format!("{prefix}{i:04}"),
        })
        .collect()
}

fn unit_direction(root: u64, label: &str, class: usize, dim: usize) -> Vec<f64> {
    let mut rng = seed::rng(root, label, class as u64);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn ensure_coverage(assign: &mut [usize], n_classes: usize, root: u64, label: &str) {
    let mut counts = vec![0usize; n_classes];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    for missing in 0..n_classes {
        if counts[missing] > 0 {
            continue;
        }
        let mut rng = seed::rng(root, label, missing as u64);
        loop {
            let idx = rng.random_range(0..assign.len());
            if counts[assign[idx]] >= 2 {
                counts[assign[idx]] -= 1;
                assign[idx] = missing;
                counts[missing] = 1;
                break;
            }
        }
    }
}

/// Generate `n_train + n_bench` captioned clips.
pub fn gen_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let needed = cfg.n_verbs.max(cfg.n_nouns);
    if cfg.n_train < needed {
        return Err(SynthError::CoverageImpossible {
            needed,
            available: cfg.n_train,
        });
    }
    let root = cfg.seed;
    let dim = cfg.feature_dim;
    let verb_words = class_words(SlotKind::Verb, cfg.n_verbs);
    let noun_words = class_words(SlotKind::Noun, cfg.n_nouns);
    let verb_dirs: Vec<_> = (0..cfg.n_verbs).map(|c| unit_direction(root, "verb_dir", c, dim)).collect();
    let noun_dirs: Vec<_> = (0..cfg.n_nouns).map(|c| unit_direction(root, "noun_dir", c, dim)).collect();
    let scene_dirs: Vec<_> = (0..cfg.n_scenes).map(|c| unit_direction(root, "scene_dir", c, dim)).collect();

    let n = cfg.total();
    let mut verbs_of = Vec::with_capacity(n);
    let mut nouns_of = Vec::with_capacity(n);
    let mut scenes_of = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = seed::rng(root, "assign", i as u64);
        verbs_of.push(rng.random_range(0..cfg.n_verbs));
        nouns_of.push(rng.random_range(0..cfg.n_nouns));
        scenes_of.push(rng.random_range(0..cfg.n_scenes));
    }
    ensure_coverage(&mut verbs_of, cfg.n_verbs, root, "cover_verb");
    ensure_coverage(&mut nouns_of, cfg.n_nouns, root, "cover_noun");

    let mut captions = Vec::with_capacity(n);
    let mut clips = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (v, o, s) = (verbs_of[i], nouns_of[i], scenes_of[i]);
        let mut rng = seed::rng(root, "noise", i as u64);
        let feature: Vec<f32> = (0..dim)
            .map(|k| {
                let eps: f64 = rng.sample(StandardNormal);
                (cfg.verb_snr * verb_dirs[v][k]
                    + cfg.noun_snr * noun_dirs[o][k]
                    + cfg.scene_snr * scene_dirs[s][k]
                    + cfg.noise_sigma * eps) as f32
            })
            .collect();
        let caption_id = format!("cap{i:06}");
        let clip_id = format!("clip{i:06}");
        let scene_id = format!("scene{s:03}");
        let text = format!("#C C {} the {}", s_form(&verb_words[v]), noun_words[o]);
        captions.push(
            CaptionRecord::new(caption_id.clone(), text, verb_words[v].clone(), vec![noun_words[o].clone()])
                .with_scene(scene_id.clone())
                .with_clip(clip_id.clone()),
        );
        clips.push(ClipRecord {
            clip_id,
            feature,
            caption_id,
            scene_id,
        });
        labels.push((v, o, s));
    }

    let verbs = Lexicon::from_lemmas(SlotKind::Verb, &verb_words).expect("generated lemmas are valid");
    let nouns = Lexicon::from_lemmas(SlotKind::Noun, &noun_words).expect("generated lemmas are valid");
    Ok(SynthCorpus {
        captions,
        clips,
        verbs,
        nouns,
        synonyms: SynonymDict::new(),
        verb_dirs,
        noun_dirs,
        scene_dirs,
        labels,
    })
}

/// Disjoint train/bench index sets, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub bench: Vec<usize>,
}

pub fn split_bench(corpus_len: usize, cfg: &SynthConfig) -> Result<Split, SynthError> {
    let need = cfg.n_train + cfg.n_bench;
    if corpus_len < need {
        return Err(SynthError::InsufficientData {
            have: corpus_len,
            need,
        });
    }
    let mut idx: Vec<usize> = (0..corpus_len).collect();
    let mut rng = seed::rng(cfg.seed, "split", 0);
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut train = idx[..cfg.n_train].to_vec();
    let mut bench = idx[cfg.n_train..need].to_vec();
    train.sort_unstable();
    bench.sort_unstable();
    Ok(Split { train, bench })
}
