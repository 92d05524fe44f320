use alloc::collections::BTreeMap;

use crate::math::{exp, ln};
use crate::model::{Token, TokenSeq};

fn ngram_counts(tokens: &[Token], n: usize) -> BTreeMap<&[Token], usize> {
    let mut counts = BTreeMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU on `[0, 100]` over EOS-stripped contents.
///
/// Order-1 precision is unsmoothed, so a hypothesis sharing no token with
/// the reference scores 0. Higher orders use add-one smoothing. An empty
/// hypothesis scores 0 unless the reference is empty too, in which case the
/// two are identical and score 100.
pub fn sentence_bleu(reference: &TokenSeq, hypothesis: &TokenSeq, max_order: usize) -> f64 {
    let (r, h) = (reference.content(), hypothesis.content());
    if h.is_empty() || max_order == 0 {
        return if r.is_empty() && h.is_empty() { 100.0 } else { 0.0 };
    }
    let mut log_p = 0.0;
    for n in 1..=max_order {
        let hyp_counts = ngram_counts(h, n);
        let ref_counts = ngram_counts(r, n);
        let clipped: usize = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let total = h.len().saturating_sub(n - 1);
        let (num, den) = if n == 1 {
            (clipped as f64, total as f64)
        } else {
            (clipped as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_p += ln(num / den);
    }
    let bp = if h.len() >= r.len() {
        1.0
    } else {
        exp(1.0 - r.len() as f64 / h.len() as f64)
    };
    100.0 * bp * exp(log_p / max_order as f64)
}
