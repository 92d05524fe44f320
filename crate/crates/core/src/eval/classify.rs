use alloc::vec::Vec;

use crate::{Error, Result};

/// Scores with binary labels; higher scores predict the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch("scores and labels"));
        }
        if scores.is_empty() {
            return Err(Error::InvalidArgument("no scores"));
        }
        Ok(LabeledScores { scores, labels })
    }

    /// Indices sorted by descending score, split into runs of equal score.
    fn tied_groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if self.scores[g[0]] == self.scores[i] => g.push(i),
                _ => groups.push(alloc::vec![i]),
            }
        }
        groups
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U over tied rank groups).
pub fn roc_auc(data: &LabeledScores) -> Result<f64> {
    let pos = data.labels.iter().filter(|&&l| l).count();
    let neg = data.labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    // walk from the highest score; negatives below the current group
    let mut neg_above = 0usize;
    let mut wins = 0.0;
    for g in data.tied_groups() {
        let gp = g.iter().filter(|&&i| data.labels[i]).count();
        let gn = g.len() - gp;
        // positives in this group beat every negative not yet seen
        wins += gp as f64 * ((neg - neg_above - gn) as f64 + 0.5 * gn as f64);
        neg_above += gn;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision: sum over tied score groups of
/// `(positives in group / total positives) * precision at that group`.
pub fn aupr(data: &LabeledScores) -> Result<f64> {
    let total_pos = data.labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for g in data.tied_groups() {
        let gp = g.iter().filter(|&&i| data.labels[i]).count();
        tp += gp;
        seen += g.len();
        if gp > 0 {
            ap += (gp as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}
