//! Ensemble-diversity baselines that need no information-theoretic model.

use alloc::vec::Vec;

use super::align::align_tokens;
use super::bleu::sentence_bleu;
use crate::math::{exp, variance};
use crate::model::TokenSeq;
use crate::posterior::member_seq_log_probs;
use crate::seq::Weighted;
use crate::{Error, Result};

/// Which per-member sequence statistic the variance is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum VarianceVariant {
    /// `P(y)`
    Prob,
    /// `P(y)^(1/L)`
    ProbNorm,
    /// `ln P(y)`
    LogProb,
    /// `ln P(y) / L`
    LogProbNorm,
}

impl VarianceVariant {
    pub const ALL: [VarianceVariant; 4] = [
        VarianceVariant::Prob,
        VarianceVariant::ProbNorm,
        VarianceVariant::LogProb,
        VarianceVariant::LogProbNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarianceVariant::Prob => "var_p",
            VarianceVariant::ProbNorm => "var_p_norm",
            VarianceVariant::LogProb => "var_lnp",
            VarianceVariant::LogProbNorm => "var_lnp_norm",
        }
    }

    fn statistic(self, log_p: f64, len: usize) -> f64 {
        let l = len.max(1) as f64;
        match self {
            VarianceVariant::Prob => exp(log_p),
            VarianceVariant::ProbNorm => exp(log_p / l),
            VarianceVariant::LogProb => log_p,
            VarianceVariant::LogProbNorm => log_p / l,
        }
    }
}

/// Weighted average over hypotheses of the population variance across
/// members of the chosen statistic. `member_log_probs[i][m]` is `ln P_m(y_i)`
/// and `lengths[i]` is `|y_i|` including EOS.
pub fn heuristic_variance(
    member_log_probs: &[Vec<f64>],
    lengths: &[usize],
    weights: &[f64],
    variant: VarianceVariant,
) -> Result<f64> {
    if member_log_probs.len() != lengths.len() || lengths.len() != weights.len() {
        return Err(Error::LengthMismatch("hypotheses, lengths and weights"));
    }
    if member_log_probs.is_empty() {
        return Err(Error::EmptyHypothesisSet);
    }
    let mut total = 0.0;
    for ((lps, &len), &w) in member_log_probs.iter().zip(lengths).zip(weights) {
        let stats: Vec<f64> = lps.iter().map(|&lp| variant.statistic(lp, len)).collect();
        total += w * variance(&stats);
    }
    Ok(total.max(0.0))
}

impl Weighted<'_> {
    pub fn heuristic_variance(&self, variant: VarianceVariant) -> Result<f64> {
        let lps: Vec<Vec<f64>> = self
            .hypotheses
            .iter()
            .map(|h| member_seq_log_probs(&h.per_model))
            .collect();
        let lens: Vec<usize> = self.hypotheses.iter().map(|h| h.y.len()).collect();
        heuristic_variance(&lps, &lens, &self.weights, variant)
    }
}

fn mean_over_ordered_pairs(decodes: &[TokenSeq], f: impl Fn(&TokenSeq, &TokenSeq) -> f64) -> Result<f64> {
    let m = decodes.len();
    if m < 2 {
        return Err(Error::InvalidArgument("cross measures need at least 2 members"));
    }
    let mut sum = 0.0;
    for (a, ya) in decodes.iter().enumerate() {
        for (b, yb) in decodes.iter().enumerate() {
            if a != b {
                sum += f(ya, yb);
            }
        }
    }
    Ok(sum / (m * (m - 1)) as f64)
}

/// Mean squared pairwise WER between member decodes, normalized by the
/// first sequence of each ordered pair.
pub fn cross_wer(decodes: &[TokenSeq]) -> Result<f64> {
    mean_over_ordered_pairs(decodes, |a, b| {
        let al = align_tokens(a.content(), b.content());
        let w = al.edits() as f64 / al.ref_len.max(1) as f64;
        w * w
    })
}

/// Mean squared pairwise BLEU deficit `(100 - BLEU)` between member decodes,
/// the first sequence of each ordered pair acting as reference.
pub fn cross_bleu(decodes: &[TokenSeq]) -> Result<f64> {
    mean_over_ordered_pairs(decodes, |a, b| {
        let d = 100.0 - sentence_bleu(a, b, 4);
        d * d
    })
}
