use rand::seq::index::sample;
use rand::Rng;

use super::{MineError, NegativeBundle, Provenance};
use crate::corpus::{
    inflect_like, locate_slots, replace_span, tokenize, CaptionRecord, Lexicon, SlotKind, Span,
    SynonymDict,
};
use crate::seed;

fn substitutions(
    text: &str,
    tokens: &[String],
    span: Span,
    lemma: &str,
    lexicon: &Lexicon,
    dict: &SynonymDict,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<String>, MineError> {
    let legal: Vec<&str> = lexicon.lemmas().filter(|l| !dict.same_class(l, lemma)).collect();
    if legal.len() < k {
        return Err(MineError::LexiconTooSmall {
            kind: lexicon.kind(),
            available: legal.len(),
            needed: k,
        });
    }
    let surface = tokens[span.start..span.end].join(" ");
    Ok(sample(rng, legal.len(), k)
        .into_iter()
        .map(|i| replace_span(text, span, &inflect_like(&surface, lemma, legal[i])))
        .collect())
}

/// `k` verb and `k` noun negatives by substituting lexicon lemmas into the caption's slots.
///
/// Replacements are drawn uniformly without replacement from lemmas outside the
/// original word's synonym class; noun substitution targets one uniformly chosen noun slot.
pub fn mine_vocab(
    cap: &CaptionRecord,
    verbs: &Lexicon,
    nouns: &Lexicon,
    dict: &SynonymDict,
    k: usize,
    seed: u64,
) -> Result<NegativeBundle, MineError> {
    let tokens = tokenize(&cap.text);
    let slots = locate_slots(&tokens, &cap.verb, &cap.nouns)
        .ok_or_else(|| MineError::SlotsNotFound(cap.caption_id.clone()))?;
    debug_assert_eq!(verbs.kind(), SlotKind::Verb);
    let mut verb_rng = seed::rng(seed, "vocab_verb", 0);
    let verb_negs = substitutions(&cap.text, &tokens, slots.verb, &cap.verb, verbs, dict, k, &mut verb_rng)?;
    let mut noun_rng = seed::rng(seed, "vocab_noun", 0);
    let (span, lemma) = &slots.nouns[noun_rng.random_range(0..slots.nouns.len())];
    let noun_negs = substitutions(&cap.text, &tokens, *span, lemma, nouns, dict, k, &mut noun_rng)?;
    Ok(NegativeBundle {
        caption_id: cap.caption_id.clone(),
        provenance: Provenance::Vocab,
        verb_negs,
        noun_negs,
    })
}

/// [`mine_vocab`] over a corpus with per-caption seeds derived from `root_seed`.
pub fn mine_vocab_batch(
    captions: &[CaptionRecord],
    verbs: &Lexicon,
    nouns: &Lexicon,
    dict: &SynonymDict,
    k: usize,
    root_seed: u64,
) -> Result<Vec<NegativeBundle>, MineError> {
    captions
        .iter()
        .enumerate()
        .map(|(i, cap)| mine_vocab(cap, verbs, nouns, dict, k, seed::derive(root_seed, "vocab", i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn lex(kind: SlotKind, words: &[&str]) -> Lexicon {
        Lexicon::from_lemmas(kind, words.iter().copied()).unwrap()
    }

    fn grass() -> CaptionRecord {
        CaptionRecord::new("c1", "#C C cuts the grass", "cut", vec!["grass".into()])
    }

    #[test]
    fn only_two_legal_verbs() {
        let verbs = lex(SlotKind::Verb, &["cut", "pick", "open"]);
        let nouns = lex(SlotKind::Noun, &["grass", "cup", "bowl"]);
        let b = mine_vocab(&grass(), &verbs, &nouns, &SynonymDict::new(), 2, 42).unwrap();
        let mut v = b.verb_negs.clone();
        v.sort();
        assert_eq!(v, ["#C C opens the grass", "#C C picks the grass"]);
        let mut n = b.noun_negs.clone();
        n.sort();
        assert_eq!(n, ["#C C cuts the bowl", "#C C cuts the cup"]);
        assert_eq!(b.provenance, Provenance::Vocab);
        assert_eq!(b, mine_vocab(&grass(), &verbs, &nouns, &SynonymDict::new(), 2, 42).unwrap());
    }

    #[test]
    fn synonyms_are_never_drawn() {
        let verbs = lex(SlotKind::Verb, &["cut", "slice", "pick", "open"]);
        let nouns = lex(SlotKind::Noun, &["grass", "cup", "bowl"]);
        let dict: SynonymDict = [("cut".to_string(), 1), ("slice".to_string(), 1)].into_iter().collect();
        for s in 0..20 {
            let b = mine_vocab(&grass(), &verbs, &nouns, &dict, 2, s).unwrap();
            assert!(b.verb_negs.iter().all(|t| !t.contains("slices")));
        }
        assert!(matches!(
            mine_vocab(&grass(), &verbs, &nouns, &dict, 3, 0),
            Err(MineError::LexiconTooSmall { kind: SlotKind::Verb, available: 2, needed: 3 })
        ));
    }

    #[test]
    fn unlocatable_slots() {
        let verbs = lex(SlotKind::Verb, &["cut", "pick"]);
        let nouns = lex(SlotKind::Noun, &["grass", "cup"]);
        let bad = CaptionRecord::new("c2", "#C C walks around", "cut", vec!["grass".into()]);
        assert!(matches!(
            mine_vocab(&bad, &verbs, &nouns, &SynonymDict::new(), 1, 0),
            Err(MineError::SlotsNotFound(_))
        ));
    }

    #[test]
    fn replacement_frequencies_are_uniform() {
        // chi-square goodness of fit of the first drawn verb over many seeds
        let words = ["cut", "pick", "open", "close", "wash", "stir", "pour", "hold"];
        let verbs = lex(SlotKind::Verb, &words);
        let nouns = lex(SlotKind::Noun, &["grass", "cup"]);
        let trials = 7000;
        let mut counts: HashMap<String, usize> = HashMap::new();
        for s in 0..trials {
            let b = mine_vocab(&grass(), &verbs, &nouns, &SynonymDict::new(), 1, s).unwrap();
            *counts.entry(b.verb_negs[0].clone()).or_default() += 1;
        }
        assert_eq!(counts.len(), 7);
        let expected = trials as f64 / 7.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 6 degrees of freedom: mean 6, sd sqrt(12); 3 sd above the mean
        assert!(chi2 < 6.0 + 3.0 * 12f64.sqrt(), "chi2 = {chi2}");
    }
}
