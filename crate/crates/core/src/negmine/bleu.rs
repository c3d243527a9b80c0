use super::MineError;

/// Clipped n-gram matches and the candidate's n-gram total.
fn clipped_matches<S: PartialEq>(cand: &[S], reference: &[S], n: usize) -> (usize, usize) {
    let total = cand.len() + 1 - n;
    let ref_grams: Vec<&[S]> = reference.windows(n).collect();
    let mut used = vec![false; ref_grams.len()];
    let mut matches = 0;
    for gram in cand.windows(n) {
        // each reference occurrence can be claimed once, which clips the counts
        if let Some(j) = (0..ref_grams.len()).find(|&j| !used[j] && ref_grams[j] == gram) {
            used[j] = true;
            matches += 1;
        }
    }
    (matches, total)
}

/// Sentence BLEU of `candidate` against one `reference`.
///
/// Geometric mean of clipped n-gram precisions for `n = 1..=min(max_n, |candidate|)`,
/// where a zero match count is smoothed to `1 / (total + 1)`, times the brevity
/// penalty `exp(min(0, 1 - |ref| / |cand|))`.
pub fn bleu<S: PartialEq>(candidate: &[S], reference: &[S], max_n: usize) -> Result<f64, MineError> {
    if candidate.is_empty() || reference.is_empty() || max_n == 0 {
        return Err(MineError::EmptyInput);
    }
    let orders = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let (m, t) = clipped_matches(candidate, reference, n);
        let p = if m == 0 {
            1.0 / (t as f64 + 1.0)
        } else {
            m as f64 / t as f64
        };
        log_sum += p.ln();
    }
    let ratio = reference.len() as f64 / candidate.len() as f64;
    let bp = (1.0 - ratio).min(0.0);
    Ok((log_sum / orders as f64 + bp).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    /// Count-table BLEU written independently of the implementation above.
    fn oracle(c: &[&str], r: &[&str], max_n: usize) -> f64 {
        let grams = |s: &[&str], n: usize| {
            let mut m: HashMap<Vec<String>, usize> = HashMap::new();
            for i in 0..=s.len() - n {
                *m.entry(s[i..i + n].iter().map(|x| x.to_string()).collect()).or_default() += 1;
            }
            m
        };
        let big_n = max_n.min(c.len());
        let mut prod = 1.0f64;
        for n in 1..=big_n {
            let cg = grams(c, n);
            let rg = if r.len() >= n { grams(r, n) } else { HashMap::new() };
            let m: usize = cg.iter().map(|(g, k)| (*k).min(*rg.get(g).unwrap_or(&0))).sum();
            let t: usize = cg.values().sum();
            prod *= if m == 0 { 1.0 / (t as f64 + 1.0) } else { m as f64 / t as f64 };
        }
        let bp = if c.len() < r.len() { (1.0 - r.len() as f64 / c.len() as f64).exp() } else { 1.0 };
        prod.powf(1.0 / big_n as f64) * bp
    }

    #[test]
    fn identical_sentences_score_one() {
        let s = toks("#C C cuts the grass");
        assert!((bleu(&s, &s, 4).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_tokens_match_oracle() {
        let c = toks("a b c d e");
        let r = toks("v w x y z");
        let got = bleu(&c, &r, 4).unwrap();
        // every order smoothed: (1/6 * 1/5 * 1/4 * 1/3)^(1/4)
        let frozen = (1.0f64 / 360.0).powf(0.25);
        assert!((got - frozen).abs() < 1e-12);
        assert!((got - oracle(&c, &r, 4)).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_worked_example() {
        let r = toks("#C C cuts the grass");
        let c = &r[..4];
        assert!((bleu(c, &r, 4).unwrap() - (-0.25f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn clipping_limits_repeated_grams() {
        let c = toks("the the the the");
        let r = toks("the cat");
        let got = bleu(&c, &r, 1).unwrap();
        assert!((got - 0.25).abs() < 1e-12);
        assert!((got - oracle(&c, &r, 1)).abs() < 1e-12);
    }

    #[test]
    fn empty_input() {
        let e: [&str; 0] = [];
        assert!(matches!(bleu(&e, &toks("a"), 4), Err(MineError::EmptyInput)));
        assert!(matches!(bleu(&toks("a"), &e, 4), Err(MineError::EmptyInput)));
    }

    proptest::proptest! {
        #[test]
        fn matches_oracle_and_is_bounded(
            c in proptest::collection::vec(0u8..6, 1..9),
            r in proptest::collection::vec(0u8..6, 1..9),
        ) {
            let names = ["a", "b", "c", "d", "e", "f"];
            let c: Vec<&str> = c.iter().map(|&i| names[i as usize]).collect();
            let r: Vec<&str> = r.iter().map(|&i| names[i as usize]).collect();
            let got = bleu(&c, &r, 4).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&got));
            proptest::prop_assert!((got - oracle(&c, &r, 4)).abs() < 1e-12);
            proptest::prop_assert!((bleu(&c, &c, 4).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
