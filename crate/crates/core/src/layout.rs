//! File layout of a data directory shared by the command-line stages.

use std::path::{Path, PathBuf};

use crate::corpus::{
    read_corpus, read_synonyms, write_corpus, write_synonyms, CaptionRecord, CorpusError, FeatureTable, SynonymDict,
};
use crate::synth::{Split, SynthCorpus};
use crate::Error;

/// Which side of the train/bench split a file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Bench,
}

impl Part {
    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Bench => "bench",
        }
    }
}

impl std::str::FromStr for Part {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Part::Train),
            "bench" => Ok(Part::Bench),
            _ => Err(format!("unknown split {s:?} (expected train or bench)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.bin")
    }

    pub fn ids(&self) -> PathBuf {
        self.root.join("ids.txt")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn synonyms(&self) -> PathBuf {
        self.root.join("synonyms.json")
    }

    pub fn bundles(&self, part: Part) -> PathBuf {
        self.root.join(format!("bundles.{}.jsonl", part.name()))
    }

    pub fn trials(&self) -> PathBuf {
        self.root.join("trials.jsonl")
    }

    pub fn write_synth(&self, corpus: &SynthCorpus, split: &Split) -> Result<(), Error> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_corpus(&self.corpus(), &corpus.captions).map_err(at(&self.corpus()))?;
        corpus.feature_table().write(&self.features(), &self.ids()).map_err(at(&self.features()))?;
        write_synonyms(&self.synonyms(), &corpus.synonyms).map_err(at(&self.synonyms()))?;
        let mut s = serde_json::to_string(split).expect("split serialises");
        s.push('\n');
        std::fs::write(self.split(), s).map_err(|e| Error::io(&self.split(), e))
    }

    pub fn load(&self) -> Result<Dataset, Error> {
        let captions = read_corpus(&self.corpus()).map_err(at(&self.corpus()))?;
        let table = FeatureTable::read(&self.features(), &self.ids()).map_err(at(&self.features()))?;
        let synonyms = read_synonyms(&self.synonyms()).map_err(at(&self.synonyms()))?;
        let raw = std::fs::read_to_string(self.split()).map_err(|e| Error::io(&self.split(), e))?;
        let split: Split = serde_json::from_str(&raw)
            .map_err(|e| Error::Data(format!("{}: {e}", self.split().display())))?;
        if let Some(&i) = split.train.iter().chain(&split.bench).find(|&&i| i >= captions.len()) {
            return Err(Error::Data(format!("split index {i} out of range for {} captions", captions.len())));
        }
        Ok(Dataset { captions, table, synonyms, split })
    }
}

/// Attach `path` to bare I/O failures.
pub fn at(path: &Path) -> impl Fn(CorpusError) -> Error + '_ {
    move |e| match e {
        CorpusError::Io(io) => Error::io(path, io),
        e => Error::Corpus(e),
    }
}

/// Everything persisted by the synth stage.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub captions: Vec<CaptionRecord>,
    pub table: FeatureTable,
    pub synonyms: SynonymDict,
    pub split: Split,
}

impl Dataset {
    pub fn part(&self, part: Part) -> Vec<CaptionRecord> {
        let idx = match part {
            Part::Train => &self.split.train,
            Part::Bench => &self.split.bench,
        };
        idx.iter().map(|&i| self.captions[i].clone()).collect()
    }
}
