use ndarray::Array2;

use super::BenchError;
use crate::corpus::{CaptionRecord, SynonymDict};

/// Gallery order for one query: descending score, ties by gallery index.
fn ranking(scores: ndarray::ArrayView1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn check_shapes<A>(s: &Array2<f64>, rel: &Array2<A>) -> Result<(), BenchError> {
    if s.dim() != rel.dim() {
        return Err(BenchError::Shape(format!("scores {:?} vs relevance {:?}", s.dim(), rel.dim())));
    }
    if s.nrows() == 0 {
        return Err(BenchError::EmptyTrialSet);
    }
    Ok(())
}

/// Mean average precision with binary relevance.
pub fn retrieval_map(s: &Array2<f64>, rel: &Array2<bool>) -> Result<f64, BenchError> {
    check_shapes(s, rel)?;
    let mut total = 0.0;
    for (q, row) in s.rows().into_iter().enumerate() {
        let n_rel = rel.row(q).iter().filter(|&&r| r).count();
        if n_rel == 0 {
            return Err(BenchError::QueryWithoutRelevant(q));
        }
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (rank, g) in ranking(row).into_iter().enumerate() {
            if rel[[q, g]] {
                hits += 1;
                ap += hits as f64 / (rank + 1) as f64;
            }
        }
        total += ap / n_rel as f64;
    }
    Ok(total / s.nrows() as f64)
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains.enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum()
}

/// Mean nDCG with graded relevance, `DCG = sum rel_i / log2(i + 1)` over ranks `i >= 1`,
/// truncated at `k` when given.
pub fn retrieval_ndcg(s: &Array2<f64>, rel: &Array2<f64>, k: Option<usize>) -> Result<f64, BenchError> {
    check_shapes(s, rel)?;
    let cut = k.unwrap_or(usize::MAX);
    let mut total = 0.0;
    for (q, row) in s.rows().into_iter().enumerate() {
        let r = rel.row(q);
        if !r.iter().any(|&x| x > 0.0) {
            return Err(BenchError::QueryWithoutRelevant(q));
        }
        let got = dcg(ranking(row).into_iter().take(cut).map(|g| r[g]));
        let mut ideal: Vec<f64> = r.to_vec();
        ideal.sort_by(|a, b| b.total_cmp(a));
        let best = dcg(ideal.into_iter().take(cut));
        total += got / best;
    }
    Ok(total / s.nrows() as f64)
}

/// `0.5 * [same verb class] + 0.5 * [some noun class shared]`.
pub fn graded_relevance(q: &[CaptionRecord], g: &[CaptionRecord], dict: &SynonymDict) -> Array2<f64> {
    Array2::from_shape_fn((q.len(), g.len()), |(i, j)| {
        let (a, b) = (&q[i], &g[j]);
        let verb = if dict.same_class(&a.verb, &b.verb) { 0.5 } else { 0.0 };
        let noun = if a.nouns.iter().any(|x| b.nouns.iter().any(|y| dict.same_class(x, y))) { 0.5 } else { 0.0 };
        verb + noun
    })
}

/// Binary relevance for mAP: fully relevant pairs only.
pub fn binary_relevance(graded: &Array2<f64>) -> Array2<bool> {
    graded.mapv(|r| r == 1.0)
}
