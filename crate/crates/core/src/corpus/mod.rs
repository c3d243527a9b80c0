//! Caption and clip-feature corpora: parsing, lexicons, synonym classes, file formats.

mod io;
mod lexicon;
mod parse;

pub use io::{read_corpus, read_ids, read_synonyms, write_corpus, write_ids, write_synonyms, FeatureTable};
pub use lexicon::{build_lexicons, same_synonym_class, Lexicon, SlotKind, SynonymDict};
pub use parse::{
    inflect_like, locate_slots, parse_caption, replace_span, s_form, span_lemma_forms, tokenize, Slots, Span,
    MAX_SPAN_TOKENS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("caption is empty")]
    EmptyText,
    #[error("no lexicon verb found in {0:?}")]
    NoVerbFound(String),
    #[error("no lexicon noun found in {0:?}")]
    NoNounFound(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid lemma {0:?}: lemmas are lowercase without whitespace")]
    InvalidLemma(String),
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed feature file: {0}")]
    BadFeatureFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Who performs the narrated action, from the leading narration tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Narrator {
    /// `#C`: the camera wearer.
    Wearer,
    /// `#O`: somebody else.
    Other,
    Unknown,
}

impl Narrator {
    pub fn from_text(text: &str) -> Self {
        match text.split_whitespace().next() {
            Some("#C") => Narrator::Wearer,
            Some("#O") => Narrator::Other,
            _ => Narrator::Unknown,
        }
    }
}

/// A parsed narration. The narrator is derived from `text` and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CaptionLine", into = "CaptionLine")]
pub struct CaptionRecord {
    pub caption_id: String,
    pub text: String,
    pub narrator: Narrator,
    pub verb: String,
    pub nouns: Vec<String>,
    pub scene_id: String,
    pub clip_id: String,
}

impl CaptionRecord {
    pub fn new(
        caption_id: impl Into<String>,
        text: impl Into<String>,
        verb: impl Into<String>,
        nouns: Vec<String>,
    ) -> Self {
        let text = text.into();
        CaptionRecord {
            caption_id: caption_id.into(),
            narrator: Narrator::from_text(&text),
            text,
            verb: verb.into(),
            nouns,
            scene_id: String::new(),
            clip_id: String::new(),
        }
    }

    pub fn with_scene(mut self, scene_id: impl Into<String>) -> Self {
        self.scene_id = scene_id.into();
        self
    }

    pub fn with_clip(mut self, clip_id: impl Into<String>) -> Self {
        self.clip_id = clip_id.into();
        self
    }
}

/// On-disk JSONL shape of a caption.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionLine {
    caption_id: String,
    text: String,
    verb: String,
    nouns: Vec<String>,
    scene_id: String,
    clip_id: String,
}

impl From<CaptionLine> for CaptionRecord {
    fn from(l: CaptionLine) -> Self {
        CaptionRecord {
            narrator: Narrator::from_text(&l.text),
            caption_id: l.caption_id,
            text: l.text,
            verb: l.verb,
            nouns: l.nouns,
            scene_id: l.scene_id,
            clip_id: l.clip_id,
        }
    }
}

impl From<CaptionRecord> for CaptionLine {
    fn from(r: CaptionRecord) -> Self {
        CaptionLine {
            caption_id: r.caption_id,
            text: r.text,
            verb: r.verb,
            nouns: r.nouns,
            scene_id: r.scene_id,
            clip_id: r.clip_id,
        }
    }
}

/// A clip's pre-extracted feature and its links.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub feature: Vec<f32>,
    pub caption_id: String,
    pub scene_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrator_tags() {
        assert_eq!(Narrator::from_text("#C C opens a drawer"), Narrator::Wearer);
        assert_eq!(Narrator::from_text("#O person walks"), Narrator::Other);
        assert_eq!(Narrator::from_text("C opens a drawer"), Narrator::Unknown);
        assert_eq!(Narrator::from_text("#Cx opens"), Narrator::Unknown);
    }

    #[test]
    fn jsonl_keys_are_exact() {
        let rec = CaptionRecord::new("c1", "#C C opens a drawer", "open", vec!["drawer".into()])
            .with_scene("s1")
            .with_clip("k1");
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["caption_id", "clip_id", "nouns", "scene_id", "text", "verb"]);
        let back: CaptionRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.narrator, Narrator::Wearer);
    }
}
