//! Ensemble combination into token- and sequence-level predictive posteriors.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ln, log_mean_exp};
use crate::model::{check_target, ConditionalModel, Token, TokenSeq};
use crate::token::TokenStep;
use crate::toy::{build_member, ToyModel, ToyModelSpec};
use crate::{Error, Result};

/// How member distributions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Combination {
    /// Product of expectations: token-level averaging,
    /// `P(y) = prod_l mean_m P(y_l | y_<l, m)`.
    PrEx,
    /// Expectation of products: sequence-level averaging,
    /// `P(y) = mean_m prod_l P(y_l | y_<l, m)`.
    ExPr,
}

impl Combination {
    pub const ALL: [Combination; 2] = [Combination::PrEx, Combination::ExPr];

    pub fn name(self) -> &'static str {
        match self {
            Combination::PrEx => "PrEx",
            Combination::ExPr => "ExPr",
        }
    }
}

/// Members with a uniform weight each. `combination` selects the posterior
/// used for decoding; measures may still be taken under either combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<M> {
    members: Vec<M>,
    pub combination: Combination,
}

impl Ensemble<ToyModel> {
    /// Members `0..m` of a toy spec.
    pub fn toy(spec: ToyModelSpec, m: usize, combination: Combination) -> Result<Self> {
        Self::toy_range(spec, 0..m, combination)
    }

    pub fn toy_range(
        spec: ToyModelSpec,
        indices: core::ops::Range<usize>,
        combination: Combination,
    ) -> Result<Self> {
        spec.validate()?;
        Ensemble::new(indices.map(|i| build_member(spec, i)).collect(), combination)
    }
}

impl<M: ConditionalModel> Ensemble<M> {
    pub fn new(members: Vec<M>, combination: Combination) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        let (k, max_len) = (first.size_k(), first.max_len());
        if members.iter().any(|m| m.size_k() != k) {
            return Err(Error::MemberMismatch("vocabulary size"));
        }
        if members.iter().any(|m| m.max_len() != max_len) {
            return Err(Error::MemberMismatch("max_len"));
        }
        Ok(Ensemble {
            members,
            combination,
        })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn size_k(&self) -> usize {
        self.members[0].size_k()
    }

    pub fn max_len(&self) -> usize {
        self.members[0].max_len()
    }

    /// Same members, different decoding combination.
    pub fn with_combination(&self, combination: Combination) -> Ensemble<&M> {
        Ensemble {
            members: self.members.iter().collect(),
            combination,
        }
    }

    /// Row-major `M x K` member conditionals.
    pub(crate) fn member_dists(&self, x: &[Token], context: &[Token]) -> Result<Vec<f64>> {
        let k = self.size_k();
        let mut out = vec![0.0; self.len() * k];
        for (member, row) in self.members.iter().zip(out.chunks_exact_mut(k)) {
            member.cond_dist_into(x, context, row)?;
        }
        Ok(out)
    }

    /// Member conditionals and both posteriors at `context`, given each
    /// member's log-probability of that context.
    ///
    /// A mean-of-members ensemble can reach prefixes that every member rules
    /// out on its own; such steps carry no expectation-of-products posterior.
    pub fn step(&self, x: &[Token], context: &[Token], log_prefix: &[f64]) -> Result<TokenStep> {
        let dists = self.member_dists(x, context)?;
        let step = TokenStep::from_flat(self.size_k(), dists);
        let reachable = log_prefix.iter().any(|&lp| lp > f64::NEG_INFINITY);
        if self.combination == Combination::PrEx && !reachable && log_prefix.len() == self.len() {
            return Ok(step);
        }
        step.with_prefix_log_probs(log_prefix)
    }

    fn prefix_log_probs(&self, x: &[Token], context: &[Token]) -> Result<Vec<f64>> {
        let max_len = self.max_len();
        if context.len() >= max_len {
            return Err(Error::ContextTooLong {
                len: context.len(),
                max_len,
            });
        }
        let k = self.size_k();
        let mut log_prefix = vec![0.0; self.len()];
        let mut dist = vec![0.0; k];
        for l in 0..context.len() {
            let t = context[l] as usize;
            if t >= k {
                return Err(Error::TokenOutOfRange {
                    token: context[l],
                    size: k,
                });
            }
            for (member, lp) in self.members.iter().zip(log_prefix.iter_mut()) {
                member.cond_dist_into(x, &context[..l], &mut dist)?;
                *lp += ln(dist[t]);
            }
        }
        Ok(log_prefix)
    }

    /// Arithmetic mean of the member conditionals.
    pub fn token_posterior_pe(&self, x: &[Token], context: &[Token]) -> Result<Vec<f64>> {
        let dists = self.member_dists(x, context)?;
        Ok(TokenStep::from_flat(self.size_k(), dists).posterior_pe)
    }

    /// Conditional of the expectation-of-products sequence posterior:
    /// `sum_m P(context, k | m) / sum_m P(context | m)`.
    pub fn token_posterior_ep(&self, x: &[Token], context: &[Token]) -> Result<Vec<f64>> {
        let log_prefix = self.prefix_log_probs(x, context)?;
        let step = self.step(x, context, &log_prefix)?;
        step.posterior_ep.ok_or(Error::ImpossibleContext)
    }

    pub fn token_posterior(
        &self,
        x: &[Token],
        context: &[Token],
        choice: Combination,
    ) -> Result<Vec<f64>> {
        match choice {
            Combination::PrEx => self.token_posterior_pe(x, context),
            Combination::ExPr => self.token_posterior_ep(x, context),
        }
    }

    /// `L x M` matrix of `ln P(y_l | y_<l, x, member m)`.
    pub fn per_model_token_logprobs(&self, x: &[Token], y: &TokenSeq) -> Result<Vec<Vec<f64>>> {
        check_target(y, self.size_k(), self.max_len())?;
        let k = self.size_k();
        let mut dist = vec![0.0; k];
        let mut rows = Vec::with_capacity(y.len());
        for l in 0..y.len() {
            let t = y.tokens[l] as usize;
            let mut row = Vec::with_capacity(self.len());
            for member in &self.members {
                member.cond_dist_into(x, &y.tokens[..l], &mut dist)?;
                row.push(ln(dist[t]));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn seq_log_posterior(&self, x: &[Token], y: &TokenSeq, choice: Combination) -> Result<f64> {
        let rows = self.per_model_token_logprobs(x, y)?;
        Ok(seq_log_posterior_from_matrix(&rows, choice))
    }

    /// Steps along a terminated sequence, each carrying its realized token.
    pub fn trace(&self, x: &[Token], y: &TokenSeq) -> Result<Vec<TokenStep>> {
        check_target(y, self.size_k(), self.max_len())?;
        let mut log_prefix = vec![0.0; self.len()];
        let mut steps = Vec::with_capacity(y.len());
        for l in 0..y.len() {
            let t = y.tokens[l];
            let step = self.step(x, &y.tokens[..l], &log_prefix)?.with_realized(t);
            for (m, lp) in log_prefix.iter_mut().enumerate() {
                *lp += ln(step.member(m)[t as usize]);
            }
            steps.push(step);
        }
        Ok(steps)
    }
}

/// Per-member sequence log-probabilities (column sums).
pub fn member_seq_log_probs(per_model: &[Vec<f64>]) -> Vec<f64> {
    let m = per_model.first().map_or(0, Vec::len);
    (0..m)
        .map(|j| per_model.iter().map(|row| row[j]).sum())
        .collect()
}

/// Combined sequence log-probability from an `L x M` token log-prob matrix.
pub fn seq_log_posterior_from_matrix(per_model: &[Vec<f64>], choice: Combination) -> f64 {
    match choice {
        Combination::PrEx => per_model.iter().map(|row| log_mean_exp(row)).sum(),
        Combination::ExPr => log_mean_exp(&member_seq_log_probs(per_model)),
    }
}
