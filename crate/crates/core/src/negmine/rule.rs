use std::collections::HashMap;

use super::{bleu, MineError, NegativeBundle, Provenance};
use crate::corpus::{tokenize, CaptionRecord};

const BLEU_ORDER: usize = 4;

fn same_annotation(a: &CaptionRecord, b: &CaptionRecord) -> bool {
    a.verb == b.verb && a.nouns == b.nouns
}

fn top_k<'a>(
    cap_tokens: &[String],
    eligible: impl Iterator<Item = (&'a str, &'a str, &'a [String])>,
    k: usize,
) -> Result<Vec<String>, MineError> {
    let mut scored: Vec<(f64, &str, &str)> = eligible
        .map(|(id, text, toks)| Ok((bleu(toks, cap_tokens, BLEU_ORDER)?, id, text)))
        .collect::<Result<_, MineError>>()?;
    if scored.len() < k {
        return Err(MineError::PoolTooSmall {
            available: scored.len(),
            needed: k,
        });
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(k).map(|(_, _, t)| t.to_string()).collect())
}

/// The `k` pool captions with the highest BLEU against `cap` (ties by caption id).
///
/// `cap` itself and captions carrying the same verb and nouns are not eligible.
/// Results are whole sentences and go into `verb_negs`.
pub fn mine_rule(cap: &CaptionRecord, pool: &[CaptionRecord], k: usize) -> Result<NegativeBundle, MineError> {
    let cap_tokens = tokenize(&cap.text);
    let pool_tokens: Vec<_> = pool.iter().map(|p| tokenize(&p.text)).collect();
    let eligible = pool
        .iter()
        .zip(&pool_tokens)
        .filter(|(p, toks)| {
            p.caption_id != cap.caption_id && !same_annotation(p, cap) && !toks.is_empty()
        })
        .map(|(p, toks)| (p.caption_id.as_str(), p.text.as_str(), toks.as_slice()));
    Ok(NegativeBundle {
        caption_id: cap.caption_id.clone(),
        provenance: Provenance::Rule,
        verb_negs: top_k(&cap_tokens, eligible, k)?,
        noun_negs: Vec::new(),
    })
}

struct PoolEntry {
    caption_id: String,
    text: String,
    verb: String,
    nouns: Vec<String>,
    tokens: Vec<String>,
}

/// Pool deduplicated by caption text, for mining many captions against one corpus.
///
/// Each distinct text is represented by its smallest caption id, so repeated
/// narrations cannot fill the top-k with copies of one sentence.
pub struct RuleIndex {
    entries: Vec<PoolEntry>,
    cache: HashMap<(String, String, Vec<String>), Vec<String>>,
}

impl RuleIndex {
    pub fn new(pool: &[CaptionRecord]) -> Self {
        let mut by_text: HashMap<&str, &CaptionRecord> = HashMap::new();
        for p in pool {
            by_text
                .entry(p.text.as_str())
                .and_modify(|e| {
                    if p.caption_id < e.caption_id {
                        *e = p;
                    }
                })
                .or_insert(p);
        }
        let mut entries: Vec<PoolEntry> = by_text
            .into_values()
            .map(|p| PoolEntry {
                caption_id: p.caption_id.clone(),
                text: p.text.clone(),
                verb: p.verb.clone(),
                nouns: p.nouns.clone(),
                tokens: tokenize(&p.text),
            })
            .filter(|e| !e.tokens.is_empty())
            .collect();
        entries.sort_by(|a, b| a.caption_id.cmp(&b.caption_id));
        RuleIndex {
            entries,
            cache: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mine(&mut self, cap: &CaptionRecord, k: usize) -> Result<NegativeBundle, MineError> {
        let key = (cap.text.clone(), cap.verb.clone(), cap.nouns.clone());
        let verb_negs = match self.cache.get(&key) {
            Some(hit) if hit.len() >= k => hit[..k].to_vec(),
            _ => {
                let cap_tokens = tokenize(&cap.text);
                let eligible = self
                    .entries
                    .iter()
                    .filter(|e| e.text != cap.text && !(e.verb == cap.verb && e.nouns == cap.nouns))
                    .map(|e| (e.caption_id.as_str(), e.text.as_str(), e.tokens.as_slice()));
                let negs = top_k(&cap_tokens, eligible, k)?;
                self.cache.insert(key, negs.clone());
                negs
            }
        };
        Ok(NegativeBundle {
            caption_id: cap.caption_id.clone(),
            provenance: Provenance::Rule,
            verb_negs,
            noun_negs: Vec::new(),
        })
    }
}
