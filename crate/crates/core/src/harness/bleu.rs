use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{bail, Result};

fn ngram_counts<S: Eq + Hash>(tokens: &[S], n: usize) -> HashMap<&[S], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Corpus-free BLEU over token sequences.
///
/// Geometric mean of clipped n-gram precisions for orders `1..=max_order`
/// times the brevity penalty. An order with no matches gets precision
/// `1 / (2^j * total)` for its `j`-th occurrence; orders longer than the
/// hypothesis are left out of the mean.
pub fn bleu_lite<S: Eq + Hash>(hypothesis: &[S], reference: &[S], max_order: usize) -> Result<f64> {
    if reference.is_empty() {
        bail!(InvalidReference, "empty reference");
    }
    if max_order == 0 {
        bail!(InvalidArgument, "max_order must be >= 1");
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    let mut smooth = 1.0;
    for n in 1..=max_order.min(hypothesis.len()) {
        let hyp = ngram_counts(hypothesis, n);
        let refs = ngram_counts(reference, n);
        let total = hypothesis.len() + 1 - n;
        let matched: usize = hyp
            .iter()
            .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if matched == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total as f64)
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
        orders += 1;
    }
    let (h, r) = (hypothesis.len() as f64, reference.len() as f64);
    let bp = if h > r { 1.0 } else { (1.0 - r / h).exp() };
    Ok(bp * (log_sum / orders as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        let r = [3, 1, 4, 1, 5, 9, 2, 6];
        assert!((bleu_lite(&r, &r, 4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_pair() {
        let hyp: Vec<u32> = (0..10).collect();
        let reference: Vec<u32> = (100..110).collect();
        let oracle = (1.0f64 / (20.0 * 36.0 * 64.0 * 112.0)).powf(0.25);
        let b = bleu_lite(&hyp, &reference, 4).unwrap();
        assert!((b - oracle).abs() < 1e-12);
        assert!(b < 0.05);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(bleu_lite::<u32>(&[], &[1, 2], 4).unwrap(), 0.0);
        assert!(matches!(bleu_lite::<u32>(&[1], &[], 4), Err(crate::Error::InvalidReference(_))));
        // clipped unigram counts: "the the the" against "the cat"
        let b = bleu_lite(&["the", "the", "the"], &["the", "cat"], 1).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
    }
}
