mod common;

use std::collections::HashSet;

use common::{clean_edit, rng, violations};
use hoi_core::corpus::{s_form, CaptionRecord};
use hoi_core::negmine::*;
use hoi_core::synth::{gen_corpus, SynthConfig, SynthCorpus};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

fn corpus(seed: u64, n: usize) -> SynthCorpus {
    gen_corpus(&SynthConfig { n_train: n - 1, n_bench: 1, seed, ..SynthConfig::default() }).unwrap()
}

#[test]
fn ten_thousand_mined_bundles_are_valid_and_survive_persistence() {
    let c = corpus(1, 10_000);
    let bundles = mine_vocab_batch(&c.captions, &c.verbs, &c.nouns, &c.synonyms, 10, 9).unwrap();
    assert_eq!(bundles.len(), 10_000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.jsonl");
    write_bundles(&path, &bundles).unwrap();
    let back = read_bundles(&path).unwrap();
    assert_eq!(back, bundles);
    for (b, cap) in back.iter().zip(&c.captions) {
        assert_eq!((b.verb_negs.len(), b.noun_negs.len()), (10, 10));
        assert_eq!(b.provenance, Provenance::Vocab);
        assert!(violations(b, cap, &c.synonyms).is_empty(), "{b:?}");
        assert_eq!(validate_bundle(b, cap, &c.synonyms).dropped, 0);
    }
}

/// Candidate negatives of every kind, valid or not, for one caption.
fn adversarial(cap: &CaptionRecord, c: &SynthCorpus, r: &mut impl Rng, n: usize) -> (Vec<String>, Vec<String>) {
    let verbs: Vec<&str> = c.verbs.lemmas().collect();
    let nouns: Vec<&str> = c.nouns.lemmas().collect();
    let with = |v: &str, noun: &str| format!("#C C {} the {noun}", s_form(v));
    let noun = cap.nouns[0].as_str();
    let synonyms_of = |l: &str, pool: &[&str]| -> Vec<String> {
        pool.iter().filter(|x| **x != l && c.synonyms.same_class(x, l)).map(|x| x.to_string()).collect()
    };
    let mut vlist: Vec<String> = Vec::new();
    let mut nlist: Vec<String> = Vec::new();
    for _ in 0..n {
        let v = *verbs.choose(r).unwrap();
        let m = *nouns.choose(r).unwrap();
        let vs = synonyms_of(&cap.verb, &verbs);
        let ns = synonyms_of(noun, &nouns);
        let pick = |list: &[String], r: &mut dyn rand::RngCore| list.choose(r).cloned();
        vlist.push(match r.random_range(0..7) {
            0 | 1 => with(v, noun),
            2 => pick(&vs, r).map_or_else(|| cap.text.clone(), |s| with(&s, noun)),
            3 => cap.text.clone(),
            4 => vlist.last().cloned().unwrap_or_else(|| with(v, noun)),
            5 => with(v, m),
            _ => format!("#C C zq{} the {noun}", r.random_range(0..5)),
        });
        nlist.push(match r.random_range(0..6) {
            0 | 1 => format!("#C C {} the {m}", s_form(&cap.verb)),
            2 => pick(&ns, r).map_or_else(|| cap.text.clone(), |s| format!("#C C {} the {s}", s_form(&cap.verb))),
            3 => nlist.last().cloned().unwrap_or_else(|| cap.text.clone()),
            4 => with(v, noun),
            _ => format!("#C C {} the {m} now", s_form(&cap.verb)),
        });
    }
    (vlist, nlist)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    // 250 cases x 40 bundles = 10k validated bundles
    #[test]
    fn validated_bundles_always_satisfy_invariants(seed in any::<u64>()) {
        let c = corpus(seed % 4, 400);
        let mut r = rng(seed);
        for _ in 0..40 {
            let cap = c.captions.choose(&mut r).unwrap();
            let (verb_negs, noun_negs) = adversarial(cap, &c, &mut r, 12);
            let provenance = if r.random_bool(0.5) { Provenance::Llm } else { Provenance::Vocab };
            let raw = NegativeBundle { caption_id: cap.caption_id.clone(), provenance, verb_negs, noun_negs };
            let v = validate_bundle(&raw, cap, &c.synonyms);
            prop_assert!(violations(&v.bundle, cap, &c.synonyms).is_empty(), "{:?}", v.bundle);
            // exactly the invalid entries and later repeats are dropped
            let pos: Vec<&str> = cap.text.split_whitespace().collect();
            let kept = |list: &[String], at: usize, lemma: &str| {
                let mut seen = HashSet::new();
                list.iter()
                    .filter(|s| clean_edit(s, &pos, at, lemma, &c.synonyms) && seen.insert((*s).clone()))
                    .cloned()
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(&v.bundle.verb_negs, &kept(&raw.verb_negs, 2, &cap.verb));
            prop_assert_eq!(&v.bundle.noun_negs, &kept(&raw.noun_negs, 4, &cap.nouns[0]));
            prop_assert_eq!(v.dropped, raw.len() - v.bundle.len());
            prop_assert_eq!(validate_bundle(&v.bundle, cap, &c.synonyms).bundle, v.bundle.clone());
        }
    }
}

#[test]
fn bleu_of_a_sentence_with_itself_is_one() {
    let mut r = rng(3);
    let words = ["#C", "C", "the", "a", "cuts", "opens", "grass", "cup", "knife", "with", "of"];
    for _ in 0..100 {
        let n = r.random_range(1..15);
        let s: Vec<&str> = (0..n).map(|_| *words.choose(&mut r).unwrap()).collect();
        assert!((bleu(&s, &s, 4).unwrap() - 1.0).abs() < 1e-12, "{s:?}");
    }
}

#[test]
fn brevity_penalty_worked_example() {
    let reference = ["#C", "C", "cuts", "the", "grass"];
    // every n-gram of the truncated candidate occurs in the reference
    let got = bleu(&reference[..4], &reference, 4).unwrap();
    assert!((got - (-0.25f64).exp()).abs() < 1e-9, "{got}");
    assert!((got - 0.7788007831).abs() < 1e-9);
}

#[test]
fn rule_prefers_the_near_duplicate() {
    let cap = CaptionRecord::new("c0", "#C C cuts the grass", "cut", vec!["grass".into()]);
    let pool = vec![
        CaptionRecord::new("c1", "#O man drives a truck slowly", "drive", vec!["truck".into()]),
        CaptionRecord::new("c2", "#C C cuts the green grass", "cut", vec!["green_grass".into()]),
    ];
    let b = mine_rule(&cap, &pool, 2).unwrap();
    assert_eq!(b.verb_negs[0], "#C C cuts the green grass");
    assert_eq!(b.provenance, Provenance::Rule);
    assert!(b.noun_negs.is_empty());
    assert!(matches!(mine_rule(&cap, &pool, 3), Err(MineError::PoolTooSmall { .. })));
}

#[test]
fn llm_mining_with_mock_passes_validation() {
    let c = corpus(2, 400);
    let caps = &c.captions[..50];
    // a repeat and a free rewrite next to one plausible edit
    let client = MockLlmClient::new(|_: &str| {
        Ok(r##"["#C C zzz the cup", "#C C zzz the cup", "not a caption at all"]"##.to_string())
    });
    let cfg = LlmConfig { concurrency: 3, ..LlmConfig::default() };
    let (bundles, fallbacks) = mine_llm_batch(caps, &client, &cfg, 3, |_, _| unreachable!()).unwrap();
    assert_eq!(fallbacks, 0);
    for (b, cap) in bundles.iter().zip(caps) {
        let v = validate_bundle(b, cap, &c.synonyms).bundle;
        assert!(v.verb_negs.len() <= 1 && v.noun_negs.len() <= 1);
    }
}
