//! Hard-negative caption generation: vocabulary substitution, BLEU-ranked corpus
//! captions, or an external language-model service; plus validation and persistence.

mod bleu;
mod llm;
mod rule;
mod validate;
mod vocab;

pub use bleu::bleu;
pub use llm::{
    build_llm_prompt, mine_llm, mine_llm_batch, parse_llm_response, HttpLlmClient, LlmClient,
    LlmConfig, LlmError, MockLlmClient, LLM_ENDPOINT_ENV,
};
pub use rule::{mine_rule, RuleIndex};
pub use validate::{check_bundle, validate_bundle, Validated};
pub use vocab::{mine_vocab, mine_vocab_batch};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SlotKind;

#[derive(Debug, Error)]
pub enum MineError {
    #[error("{kind:?} lexicon has {available} legal replacements, {needed} needed")]
    LexiconTooSmall {
        kind: SlotKind,
        available: usize,
        needed: usize,
    },
    #[error("BLEU needs non-empty candidate and reference")]
    EmptyInput,
    #[error("rule pool has {available} eligible captions, {needed} needed")]
    PoolTooSmall { available: usize, needed: usize },
    #[error("malformed language-model response: {0}")]
    MalformedResponse(String),
    #[error("cannot locate verb/noun slots in caption {0}")]
    SlotsNotFound(String),
    #[error("language model failed for caption {caption_id} after {attempts} attempts: {last}")]
    LlmExhausted {
        caption_id: String,
        attempts: usize,
        last: String,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Vocab,
    Rule,
    Llm,
}

/// Generated negatives for one caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeBundle {
    pub caption_id: String,
    pub provenance: Provenance,
    pub verb_negs: Vec<String>,
    pub noun_negs: Vec<String>,
}

impl NegativeBundle {
    pub fn len(&self) -> usize {
        self.verb_negs.len() + self.noun_negs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verb_negs.is_empty() && self.noun_negs.is_empty()
    }

    /// Verb negatives then noun negatives.
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.verb_negs.iter().chain(&self.noun_negs)
    }
}

pub fn write_bundles(path: &Path, bundles: &[NegativeBundle]) -> Result<(), MineError> {
    let mut w = BufWriter::new(File::create(path)?);
    for b in bundles {
        serde_json::to_writer(&mut w, b).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bundles(path: &Path) -> Result<Vec<NegativeBundle>, MineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| MineError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_jsonl_round_trip() {
        let b = NegativeBundle {
            caption_id: "c1".into(),
            provenance: Provenance::Llm,
            verb_negs: vec!["#C C closes a drawer".into()],
            noun_negs: vec![],
        };
        let line = serde_json::to_string(&b).unwrap();
        assert!(line.contains("\"provenance\":\"llm\""));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        write_bundles(&p, &[b.clone(), b.clone()]).unwrap();
        assert_eq!(read_bundles(&p).unwrap(), vec![b.clone(), b]);
    }
}
