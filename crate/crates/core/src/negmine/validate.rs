use std::collections::HashSet;

use super::{NegativeBundle, Provenance};
use crate::corpus::{locate_slots, span_lemma_forms, tokenize, CaptionRecord, Span, SynonymDict};

/// A filtered bundle and how many negatives were removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validated {
    pub bundle: NegativeBundle,
    pub dropped: usize,
}

/// How `neg` relates to `pos` through one slot.
#[derive(Debug, PartialEq, Eq)]
enum SlotEdit {
    /// Differs from `pos` only inside some slot and the new words are not a synonym.
    Clean,
    /// Every single-slot reading replaces a word with a synonym.
    Synonym,
    /// Not a single-slot substitution.
    Other,
}

fn classify(pos: &[String], neg: &[String], slots: &[(Span, &str)], dict: &SynonymDict) -> SlotEdit {
    let mut saw_synonym = false;
    for &(span, lemma) in slots {
        let keep_tail = pos.len() - span.end;
        if neg.len() <= span.start + keep_tail
            || neg[..span.start] != pos[..span.start]
            || neg[neg.len() - keep_tail..] != pos[span.end..]
        {
            continue;
        }
        let middle = &neg[span.start..neg.len() - keep_tail];
        if span_lemma_forms(middle).iter().any(|f| dict.same_class(f, lemma)) {
            saw_synonym = true;
        } else {
            return SlotEdit::Clean;
        }
    }
    if saw_synonym {
        SlotEdit::Synonym
    } else {
        SlotEdit::Other
    }
}

fn filter_list(
    negs: &[String],
    pos: &[String],
    slots: Option<&[(Span, &str)]>,
    all_slots: Option<&[(Span, &str)]>,
    provenance: Provenance,
    dict: &SynonymDict,
) -> Vec<String> {
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::new();
    for neg in negs {
        let toks = tokenize(neg);
        if toks.is_empty() || toks == pos || seen.contains(&toks) {
            continue;
        }
        let keep = match provenance {
            Provenance::Vocab | Provenance::Llm => {
                slots.is_some_and(|s| classify(pos, &toks, s, dict) == SlotEdit::Clean)
            }
            Provenance::Rule => {
                all_slots.is_none_or(|s| classify(pos, &toks, s, dict) != SlotEdit::Synonym)
            }
        };
        if keep {
            seen.insert(toks);
            out.push(neg.trim().to_string());
        }
    }
    out
}

/// Drop negatives that equal the positive, repeat within their list, are not a
/// single-slot edit of the positive (vocab/LLM bundles), or swap in a synonym.
pub fn validate_bundle(bundle: &NegativeBundle, cap: &CaptionRecord, dict: &SynonymDict) -> Validated {
    let pos = tokenize(&cap.text);
    let located = locate_slots(&pos, &cap.verb, &cap.nouns);
    let verb_slots: Option<Vec<(Span, &str)>> = located.as_ref().map(|s| vec![(s.verb, cap.verb.as_str())]);
    let noun_slots: Option<Vec<(Span, &str)>> = located
        .as_ref()
        .map(|s| s.nouns.iter().map(|(sp, l)| (*sp, l.as_str())).collect());
    let all_slots: Option<Vec<(Span, &str)>> = verb_slots
        .as_ref()
        .zip(noun_slots.as_ref())
        .map(|(v, n)| v.iter().chain(n).copied().collect());
    let p = bundle.provenance;
    let verb_negs = filter_list(&bundle.verb_negs, &pos, verb_slots.as_deref(), all_slots.as_deref(), p, dict);
    let noun_negs = filter_list(&bundle.noun_negs, &pos, noun_slots.as_deref(), all_slots.as_deref(), p, dict);
    let dropped = bundle.len() - verb_negs.len() - noun_negs.len();
    Validated {
        bundle: NegativeBundle {
            caption_id: bundle.caption_id.clone(),
            provenance: p,
            verb_negs,
            noun_negs,
        },
        dropped,
    }
}

/// `Ok` iff the bundle already satisfies every invariant (validation would drop nothing).
pub fn check_bundle(bundle: &NegativeBundle, cap: &CaptionRecord, dict: &SynonymDict) -> Result<(), String> {
    let v = validate_bundle(bundle, cap, dict);
    if v.dropped == 0 && v.bundle == *bundle {
        Ok(())
    } else {
        Err(format!(
            "bundle {} violates invariants: {} of {} negatives rejected",
            bundle.caption_id,
            v.dropped,
            bundle.len()
        ))
    }
}
