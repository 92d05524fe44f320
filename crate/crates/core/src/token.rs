//! Token-level uncertainty measures for one autoregressive step.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{entropy, exp, kl_divergence, ln, log_sum_exp, SATURATED};
use crate::model::Token;
use crate::posterior::Combination;
use crate::{Error, Result};

/// A measure value that may have hit a zero probability. Saturated values
/// carry [`SATURATED`] instead of `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub saturated: bool,
}

impl Flagged {
    fn finite(value: f64) -> Self {
        Flagged {
            value,
            saturated: false,
        }
    }

    fn saturated() -> Self {
        Flagged {
            value: SATURATED,
            saturated: true,
        }
    }
}

/// Member conditionals at one step together with both ensemble posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStep {
    size_k: usize,
    /// Row-major `M x K`.
    member_dists: Vec<f64>,
    pub posterior_pe: Vec<f64>,
    /// Ratio-of-joints posterior; `None` means equal prefix weights, in which
    /// case it coincides with `posterior_pe`.
    pub posterior_ep: Option<Vec<f64>>,
    pub realized_token: Option<Token>,
}

impl TokenStep {
    pub fn new(member_dists: &[Vec<f64>]) -> Result<Self> {
        let size_k = member_dists.first().ok_or(Error::EmptyEnsemble)?.len();
        if member_dists.iter().any(|d| d.len() != size_k) {
            return Err(Error::LengthMismatch("member distributions differ in length"));
        }
        let flat = member_dists.iter().flatten().copied().collect();
        Ok(Self::from_flat(size_k, flat))
    }

    pub(crate) fn from_flat(size_k: usize, member_dists: Vec<f64>) -> Self {
        let m = member_dists.len() / size_k;
        let mut posterior_pe = vec![0.0; size_k];
        for row in member_dists.chunks_exact(size_k) {
            for (acc, p) in posterior_pe.iter_mut().zip(row) {
                *acc += p;
            }
        }
        for p in posterior_pe.iter_mut() {
            *p /= m as f64;
        }
        TokenStep {
            size_k,
            member_dists,
            posterior_pe,
            posterior_ep: None,
            realized_token: None,
        }
    }

    /// Attaches the expectation-of-products posterior given each member's
    /// log-probability of the current prefix:
    /// `p_k = sum_m P(prefix, k | m) / sum_m P(prefix | m)`.
    pub fn with_prefix_log_probs(mut self, log_prefix: &[f64]) -> Result<Self> {
        if log_prefix.len() != self.n_members() {
            return Err(Error::LengthMismatch("one prefix log-probability per member"));
        }
        let norm = log_sum_exp(log_prefix);
        if norm == f64::NEG_INFINITY {
            return Err(Error::ImpossibleContext);
        }
        let mut ep = vec![0.0; self.size_k];
        for (row, lp) in self.member_dists.chunks_exact(self.size_k).zip(log_prefix) {
            let w = exp(lp - norm);
            if w > 0.0 {
                for (acc, p) in ep.iter_mut().zip(row) {
                    *acc += w * p;
                }
            }
        }
        let total: f64 = ep.iter().sum();
        for p in ep.iter_mut() {
            *p /= total;
        }
        self.posterior_ep = Some(ep);
        Ok(self)
    }

    pub fn with_realized(mut self, token: Token) -> Self {
        self.realized_token = Some(token);
        self
    }

    pub fn size_k(&self) -> usize {
        self.size_k
    }

    pub fn n_members(&self) -> usize {
        self.member_dists.len() / self.size_k
    }

    pub fn member(&self, m: usize) -> &[f64] {
        &self.member_dists[m * self.size_k..(m + 1) * self.size_k]
    }

    pub fn members(&self) -> impl Iterator<Item = &[f64]> {
        self.member_dists.chunks_exact(self.size_k)
    }

    pub fn posterior(&self, choice: Combination) -> &[f64] {
        match (choice, &self.posterior_ep) {
            (Combination::ExPr, Some(ep)) => ep,
            _ => &self.posterior_pe,
        }
    }

    fn realized(&self) -> Result<usize> {
        match self.realized_token {
            Some(t) if (t as usize) < self.size_k => Ok(t as usize),
            Some(t) => Err(Error::TokenOutOfRange {
                token: t,
                size: self.size_k,
            }),
            None => Err(Error::InvalidArgument("step has no realized token")),
        }
    }
}

/// Entropy of the predictive posterior (total uncertainty).
pub fn tok_entropy(step: &TokenStep, choice: Combination) -> f64 {
    entropy(step.posterior(choice))
}

/// Mean member entropy (expected data uncertainty).
pub fn tok_expected_entropy(step: &TokenStep) -> f64 {
    step.members().map(entropy).sum::<f64>() / step.n_members() as f64
}

/// Mutual information between the next token and the member.
///
/// Against the member-mean posterior this is `H[mean] - mean H[member]`;
/// against the ratio-of-joints posterior it is `mean_m KL(member || posterior)`.
pub fn tok_mi(step: &TokenStep, choice: Combination) -> f64 {
    match (choice, &step.posterior_ep) {
        (Combination::ExPr, Some(ep)) => {
            let mut acc = 0.0;
            for member in step.members() {
                match kl_divergence(member, ep) {
                    Some(kl) => acc += kl,
                    None => return SATURATED,
                }
            }
            (acc / step.n_members() as f64).max(0.0)
        }
        _ => (tok_entropy(step, Combination::PrEx) - tok_expected_entropy(step)).max(0.0),
    }
}

/// Expected pair-wise KL divergence, `1/M^2` over all ordered pairs
/// (self-pairs included).
pub fn tok_epkl(step: &TokenStep) -> Flagged {
    let m = step.n_members();
    let mut acc = 0.0;
    for p in step.members() {
        for q in step.members() {
            match kl_divergence(p, q) {
                Some(kl) => acc += kl,
                None => return Flagged::saturated(),
            }
        }
    }
    Flagged::finite(acc / (m * m) as f64)
}

/// Reverse mutual information, `mean_m KL(posterior || member)`.
pub fn tok_rmi(step: &TokenStep, choice: Combination) -> Flagged {
    let post = step.posterior(choice);
    let mut acc = 0.0;
    for member in step.members() {
        match kl_divergence(post, member) {
            Some(kl) => acc += kl,
            None => return Flagged::saturated(),
        }
    }
    Flagged::finite(acc / step.n_members() as f64)
}

/// Negative log-probability of the realized token under the posterior.
pub fn tok_score(step: &TokenStep, choice: Combination) -> Result<Flagged> {
    let k = step.realized()?;
    let p = step.posterior(choice)[k];
    Ok(if p > 0.0 {
        Flagged::finite(-ln(p))
    } else {
        Flagged::saturated()
    })
}

/// Mean negative point-wise mutual information at the realized token.
pub fn tok_npmi(step: &TokenStep, choice: Combination) -> Result<Flagged> {
    let k = step.realized()?;
    let p_post = step.posterior(choice)[k];
    if p_post <= 0.0 {
        return Ok(Flagged::saturated());
    }
    let mut acc = 0.0;
    for member in step.members() {
        if member[k] <= 0.0 {
            return Ok(Flagged::saturated());
        }
        acc += ln(member[k]) - ln(p_post);
    }
    Ok(Flagged::finite(-acc / step.n_members() as f64))
}
