use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;

use super::{trial_scores, BenchError, Trial};
use crate::corpus::FeatureTable;
use crate::model::DualEncoder;
use crate::{seed, Scalar};

/// Per-class member cap used by [`separability`].
pub const SEPARABILITY_CAP: usize = 150;

/// Mean intra-class cosine similarity minus mean inter-class cosine similarity over
/// all ordered pairs of distinct rows. Classes are capped at `cap` members by a
/// seeded subsample; classes left with fewer than two members are ignored.
pub fn separability<T: Scalar, L: Ord + Clone>(
    emb: &Array2<T>,
    labels: &[L],
    cap: usize,
    seed_: u64,
) -> Result<f64, BenchError> {
    if emb.nrows() != labels.len() {
        return Err(BenchError::Shape(format!("{} rows for {} labels", emb.nrows(), labels.len())));
    }
    let mut classes: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.clone()).or_default().push(i);
    }
    let d = emb.ncols();
    let mut sums: Vec<(Array1<f64>, usize)> = Vec::new();
    for (ci, members) in classes.values().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let chosen: Vec<usize> = if members.len() > cap.max(2) {
            let mut rng = seed::rng(seed_, "separability", ci as u64);
            let mut pick = rand::seq::index::sample(&mut rng, members.len(), cap.max(2)).into_vec();
            pick.sort_unstable();
            pick.into_iter().map(|k| members[k]).collect()
        } else {
            members.clone()
        };
        let mut s = Array1::<f64>::zeros(d);
        for &i in &chosen {
            let row = emb.row(i).mapv(|x| x.as_f64());
            let n = row.dot(&row).sqrt();
            if n < 1e-12 {
                return Err(BenchError::DegenerateClasses("zero-norm embedding".into()));
            }
            s.scaled_add(1.0 / n, &row);
        }
        sums.push((s, chosen.len()));
    }
    if sums.len() < 2 {
        return Err(BenchError::DegenerateClasses(format!("{} usable classes", sums.len())));
    }
    // Sum over ordered pairs of distinct unit vectors u_i . u_j from per-class sums.
    let mut total = Array1::<f64>::zeros(d);
    let (mut intra, mut intra_pairs, mut n, mut sq_counts) = (0.0, 0.0, 0.0, 0.0);
    for (s, c) in &sums {
        let c = *c as f64;
        intra += s.dot(s) - c;
        intra_pairs += c * (c - 1.0);
        n += c;
        sq_counts += c * c;
        total += s;
    }
    let class_sq: f64 = sums.iter().map(|(s, _)| s.dot(s)).sum();
    let inter = total.dot(&total) - class_sq;
    let inter_pairs = n * n - sq_counts;
    Ok(intra / intra_pairs - inter / inter_pairs)
}

/// Cosine-similarity histograms of positives, verb negatives and noun negatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityHistogram {
    pub edges: Vec<f64>,
    pub pos: Vec<usize>,
    pub verb_neg: Vec<usize>,
    pub noun_neg: Vec<usize>,
    pub mean_pos: f64,
    pub mean_verb_neg: f64,
    pub mean_noun_neg: f64,
    /// Mean positive similarity minus mean similarity over all negatives.
    pub margin: f64,
}

fn bin_of(x: f64, bins: usize) -> usize {
    let f = ((x + 1.0) / 2.0 * bins as f64).floor();
    (f.max(0.0) as usize).min(bins - 1)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl SimilarityHistogram {
    /// Bin raw similarity populations into `bins` equal bins on [-1, 1].
    pub fn from_populations(pos: &[f64], verb: &[f64], noun: &[f64], bins: usize) -> Result<Self, BenchError> {
        if bins < 2 {
            return Err(BenchError::InvalidBins(bins));
        }
        let count = |xs: &[f64]| {
            let mut h = vec![0usize; bins];
            for &x in xs {
                h[bin_of(x, bins)] += 1;
            }
            h
        };
        let negs: Vec<f64> = verb.iter().chain(noun).copied().collect();
        Ok(Self {
            edges: (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect(),
            pos: count(pos),
            verb_neg: count(verb),
            noun_neg: count(noun),
            mean_pos: mean(pos),
            mean_verb_neg: mean(verb),
            mean_noun_neg: mean(noun),
            margin: mean(pos) - mean(&negs),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "bin_lo,bin_hi,pos,verb_neg,noun_neg")?;
        for i in 0..self.pos.len() {
            writeln!(
                f,
                "{},{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.pos[i],
                self.verb_neg[i],
                self.noun_neg[i]
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Similarities between every trial clip and its positive and candidate captions.
pub fn similarity_histogram<T: Scalar>(
    enc: &DualEncoder<T>,
    features: &FeatureTable,
    trials: &[Trial],
    bins: usize,
) -> Result<SimilarityHistogram, BenchError> {
    let (mut pos, mut verb, mut noun) = (Vec::new(), Vec::new(), Vec::new());
    for t in trials {
        let s = trial_scores(enc, features, t)?;
        pos.push(s.positive);
        verb.extend(s.verb);
        noun.extend(s.noun);
    }
    SimilarityHistogram::from_populations(&pos, &verb, &noun, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn orthogonal_duplicated_classes_score_one() {
        let emb = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let s = separability(&emb, &["a", "a", "b", "b"], 150, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_sums_match_brute_force() {
        let emb = array![[1.0, 0.0], [0.6, 0.8], [0.0, 1.0], [-0.6, 0.8], [0.8, -0.6]];
        let labels = [0, 0, 1, 1, 1];
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let c: f64 = emb.row(i).dot(&emb.row(j));
                if labels[i] == labels[j] {
                    intra += c;
                    ni += 1.0;
                } else {
                    inter += c;
                    nx += 1.0;
                }
            }
        }
        let s = separability(&emb, &labels, 150, 0).unwrap();
        assert!((s - (intra / ni - inter / nx)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_labels() {
        let emb = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(separability(&emb, &[0, 1], 150, 0), Err(BenchError::DegenerateClasses(_))));
    }

    #[test]
    fn histogram_conservation() {
        let h = SimilarityHistogram::from_populations(&[0.8], &[0.1; 10], &[-0.2; 10], 50).unwrap();
        assert_eq!(h.pos.iter().sum::<usize>(), 1);
        assert_eq!(h.pos[bin_of(0.8, 50)], 1);
        assert!(h.edges[bin_of(0.8, 50)] <= 0.8 && 0.8 < h.edges[bin_of(0.8, 50) + 1]);
        assert_eq!(h.verb_neg.iter().sum::<usize>(), 10);
        assert_eq!(h.noun_neg.iter().sum::<usize>(), 10);
        assert!((h.margin - (0.8 - (-0.05))).abs() < 1e-12);
        assert_eq!(bin_of(1.0, 50), 49);
        assert_eq!(bin_of(-1.0, 50), 0);
        assert!(SimilarityHistogram::from_populations(&[], &[], &[], 1).is_err());
    }
}
