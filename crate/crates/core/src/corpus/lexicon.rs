use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CaptionRecord, CorpusError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Verb,
    Noun,
}

/// Frequency-counted lemma inventory. Iteration order is lexicographic.
///
/// Multiword lemmas join their words with `_` (`frying_pan`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    kind: SlotKind,
    entries: BTreeMap<String, usize>,
}

fn valid_lemma(lemma: &str) -> bool {
    !lemma.is_empty()
        && !lemma.chars().any(char::is_whitespace)
        && lemma.chars().all(|c| !c.is_uppercase())
}

impl Lexicon {
    pub fn new(kind: SlotKind) -> Self {
        Lexicon {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Lexicon with each lemma counted once.
    pub fn from_lemmas<I, S>(kind: SlotKind, lemmas: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::new(kind);
        for l in lemmas {
            lex.add(l.as_ref(), 1)?;
        }
        Ok(lex)
    }

    pub fn add(&mut self, lemma: &str, count: usize) -> Result<(), CorpusError> {
        if !valid_lemma(lemma) || count == 0 {
            return Err(CorpusError::InvalidLemma(lemma.to_string()));
        }
        *self.entries.entry(lemma.to_string()).or_insert(0) += count;
        Ok(())
    }

    pub fn kind(&self) -> SlotKind {
        self.kind
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.entries.contains_key(lemma)
    }

    pub fn count(&self, lemma: &str) -> usize {
        self.entries.get(lemma).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Longest lemma measured in `_`-joined words.
    pub fn max_words(&self) -> usize {
        self.entries
            .keys()
            .map(|k| k.split('_').count())
            .max()
            .unwrap_or(1)
    }
}

/// Count verb and noun annotations across a corpus.
pub fn build_lexicons(corpus: &[CaptionRecord]) -> Result<(Lexicon, Lexicon), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut verbs = Lexicon::new(SlotKind::Verb);
    let mut nouns = Lexicon::new(SlotKind::Noun);
    for rec in corpus {
        verbs.add(&rec.verb, 1)?;
        for n in &rec.nouns {
            nouns.add(n, 1)?;
        }
    }
    Ok((verbs, nouns))
}

/// Lemma to synonym-class map. Lemmas missing from the map are their own class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynonymDict {
    classes: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynonymClass<'a> {
    Listed(u64),
    Singleton(&'a str),
}

impl SynonymDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lemma: impl Into<String>, class_id: u64) {
        self.classes.insert(lemma.into(), class_id);
    }

    pub fn class_of<'a>(&self, lemma: &'a str) -> SynonymClass<'a> {
        match self.classes.get(lemma) {
            Some(&id) => SynonymClass::Listed(id),
            None => SynonymClass::Singleton(lemma),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn same_class(&self, a: &str, b: &str) -> bool {
        a == b || self.class_of(a) == self.class_of(b)
    }
}

impl FromIterator<(String, u64)> for SynonymDict {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        SynonymDict {
            classes: iter.into_iter().collect(),
        }
    }
}

pub fn same_synonym_class(a: &str, b: &str, dict: &SynonymDict) -> bool {
    dict.same_class(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(verb: &str, noun: &str) -> CaptionRecord {
        CaptionRecord::new("c", format!("#C C {verb} the {noun}"), verb, vec![noun.into()])
    }

    #[test]
    fn counts_verbs() {
        let corpus = [rec("cut", "grass"), rec("cut", "onion"), rec("pick", "cup")];
        let (verbs, nouns) = build_lexicons(&corpus).unwrap();
        assert_eq!(verbs.iter().collect::<Vec<_>>(), [("cut", 2), ("pick", 1)]);
        assert_eq!(nouns.len(), 3);
        assert_eq!(verbs.kind(), SlotKind::Verb);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(matches!(build_lexicons(&[]), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn rejects_bad_lemmas() {
        let mut lex = Lexicon::new(SlotKind::Noun);
        assert!(lex.add("Frying pan", 1).is_err());
        assert!(lex.add("frying pan", 1).is_err());
        assert!(lex.add("frying_pan", 0).is_err());
        lex.add("frying_pan", 1).unwrap();
        assert_eq!(lex.max_words(), 2);
    }

    #[test]
    fn synonym_classes() {
        let empty = SynonymDict::new();
        assert!(same_synonym_class("pick", "pick", &empty));
        let dict: SynonymDict = [("pick".to_string(), 7), ("grab".to_string(), 7)]
            .into_iter()
            .collect();
        assert!(same_synonym_class("pick", "grab", &dict));
        assert!(!same_synonym_class("pick", "cut", &dict));
        assert!(!same_synonym_class("cut", "slice", &dict));
    }
}
