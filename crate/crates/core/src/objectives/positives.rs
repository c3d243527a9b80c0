use super::ObjectiveError;
use crate::corpus::{CaptionRecord, SynonymDict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosMode {
    /// Shares the verb or at least one noun.
    VerbOrNoun,
    /// Shares at least one noun.
    NounOnly,
}

/// One sorted index set per anchor; every anchor is its own positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveSets {
    sets: Vec<Vec<usize>>,
}

impl PositiveSets {
    pub fn new(mut sets: Vec<Vec<usize>>) -> Result<Self, ObjectiveError> {
        let n = sets.len();
        for (i, s) in sets.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(ObjectiveError::EmptyPositiveSet(i));
            }
            if s.binary_search(&i).is_err() {
                return Err(ObjectiveError::BadPositiveSet(format!("set {i} does not contain itself")));
            }
            if s.last().is_some_and(|&j| j >= n) {
                return Err(ObjectiveError::BadPositiveSet(format!("set {i} indexes past {n}")));
            }
        }
        Ok(Self { sets })
    }

    pub fn singletons(n: usize) -> Self {
        Self { sets: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn full(n: usize) -> Self {
        Self { sets: vec![(0..n).collect(); n] }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn is_singleton(&self) -> bool {
        self.sets.iter().all(|s| s.len() == 1)
    }
}

fn share_noun(a: &CaptionRecord, b: &CaptionRecord, dict: &SynonymDict) -> bool {
    a.nouns.iter().any(|x| b.nouns.iter().any(|y| dict.same_class(x, y)))
}

/// Positive sets over `captions` in the given order. Word equality is synonym-class equality.
pub fn make_pos_sets(captions: &[&CaptionRecord], mode: PosMode, dict: &SynonymDict) -> PositiveSets {
    let sets = captions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            captions
                .iter()
                .enumerate()
                .filter(|&(j, b)| {
                    j == i
                        || share_noun(a, b, dict)
                        || (mode == PosMode::VerbOrNoun && dict.same_class(&a.verb, &b.verb))
                })
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    PositiveSets { sets }
}
