//! Sequence-level Monte-Carlo and importance-weighted estimators.
//!
//! Every estimator is a weighted sum over a hypothesis set of a
//! per-hypothesis term. For samples drawn from the predictive posterior the
//! weights are uniform; for a beam they are the tempered importance weights
//! `softmax_b(ln P(y_b | x) / T)`. Each term carries the factor `1 / L` when
//! length normalization is on, with `L` counting EOS.
//!
//! Joint-sequence estimators use whole-hypothesis log-probabilities;
//! chain-rule estimators sum token-level measures along each hypothesis.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::decode::{sample_members, Hypothesis};
use crate::math::{mean, softmax, McEstimate};
use crate::model::{ConditionalModel, Token};
use crate::posterior::{member_seq_log_probs, Combination, Ensemble};
use crate::token::{tok_entropy, tok_epkl, tok_expected_entropy, tok_mi, tok_rmi};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorConfig {
    /// Importance-weight temperature.
    pub temperature_t: f64,
    pub length_normalize: bool,
    pub posterior_choice: Combination,
}

impl EstimatorConfig {
    pub fn new(temperature_t: f64, length_normalize: bool, posterior_choice: Combination) -> Result<Self> {
        if !(temperature_t > 0.0) {
            return Err(Error::InvalidArgument("temperature must be positive"));
        }
        Ok(EstimatorConfig {
            temperature_t,
            length_normalize,
            posterior_choice,
        })
    }

    fn norm(&self, len: usize) -> f64 {
        if self.length_normalize {
            1.0 / len as f64
        } else {
            1.0
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            temperature_t: 1.0,
            length_normalize: true,
            posterior_choice: Combination::PrEx,
        }
    }
}

/// Hypotheses with one weight each; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighted<'a> {
    pub hypotheses: &'a [Hypothesis],
    pub weights: Vec<f64>,
}

impl<'a> Weighted<'a> {
    /// `1/S` per sample; duplicates count separately.
    pub fn uniform(hypotheses: &'a [Hypothesis]) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::EmptyHypothesisSet);
        }
        let w = 1.0 / hypotheses.len() as f64;
        Ok(Weighted {
            hypotheses,
            weights: alloc::vec![w; hypotheses.len()],
        })
    }

    pub fn importance(hypotheses: &'a [Hypothesis], t: f64, choice: Combination) -> Result<Self> {
        let weights = importance_weights(hypotheses, t, choice)?;
        Ok(Weighted { hypotheses, weights })
    }

    pub fn explicit(hypotheses: &'a [Hypothesis], weights: Vec<f64>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::EmptyHypothesisSet);
        }
        if weights.len() != hypotheses.len() {
            return Err(Error::LengthMismatch("one weight per hypothesis"));
        }
        Ok(Weighted { hypotheses, weights })
    }
}

/// `softmax_b(ln P(y_b | x, D) / t)` under `choice`.
pub fn importance_weights(hypotheses: &[Hypothesis], t: f64, choice: Combination) -> Result<Vec<f64>> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyHypothesisSet);
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive"));
    }
    let scores: Vec<f64> = hypotheses.iter().map(|h| h.log_posterior(choice)).collect();
    Ok(softmax(&scores, t))
}

/// Per-hypothesis contributions of every estimator, normalization applied.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HypothesisTerms {
    pub entropy_joint: f64,
    pub entropy_chain: f64,
    pub data_entropy_chain: f64,
    pub mi_chain: f64,
    pub epkl_chain: f64,
    pub rmi_chain: f64,
    pub rmi_joint: f64,
    pub saturated: bool,
}

pub fn hypothesis_terms<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    h: &Hypothesis,
    cfg: &EstimatorConfig,
) -> Result<HypothesisTerms> {
    let choice = cfg.posterior_choice;
    let n = cfg.norm(h.len());
    let log_post = h.log_posterior(choice);
    let member_lp = member_seq_log_probs(&h.per_model);

    let mut t = HypothesisTerms {
        entropy_joint: -n * log_post,
        rmi_joint: n * (log_post - mean(&member_lp)),
        ..HypothesisTerms::default()
    };
    let (mut h_sum, mut du_sum, mut mi_sum, mut epkl_sum, mut rmi_sum) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for step in ens.trace(x, &h.y)? {
        h_sum += tok_entropy(&step, choice);
        du_sum += tok_expected_entropy(&step);
        mi_sum += tok_mi(&step, choice);
        let e = tok_epkl(&step);
        let r = tok_rmi(&step, choice);
        t.saturated |= e.saturated || r.saturated;
        epkl_sum += e.value;
        rmi_sum += r.value;
    }
    t.entropy_chain = n * h_sum;
    t.data_entropy_chain = n * du_sum;
    t.mi_chain = n * mi_sum;
    t.epkl_chain = n * epkl_sum;
    t.rmi_chain = n * rmi_sum;
    t.saturated |= !log_post.is_finite();
    Ok(t)
}

/// Terms for every hypothesis, computed once per distinct sequence.
pub fn all_terms<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    hypotheses: &[Hypothesis],
    cfg: &EstimatorConfig,
) -> Result<Vec<HypothesisTerms>> {
    let mut cache: BTreeMap<&[Token], HypothesisTerms> = BTreeMap::new();
    hypotheses
        .iter()
        .map(|h| {
            if let Some(t) = cache.get(h.y.tokens.as_slice()) {
                return Ok(*t);
            }
            let t = hypothesis_terms(ens, x, h, cfg)?;
            cache.insert(&h.y.tokens, t);
            Ok(t)
        })
        .collect()
}

/// The estimators that are weighted sums of [`HypothesisTerms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SeqEstimator {
    EntropyJoint,
    EntropyChain,
    DataEntropyChain,
    MiChain,
    EpklChain,
    RmiChain,
    RmiJoint,
}

impl SeqEstimator {
    pub const ALL: [SeqEstimator; 7] = [
        SeqEstimator::EntropyJoint,
        SeqEstimator::EntropyChain,
        SeqEstimator::DataEntropyChain,
        SeqEstimator::MiChain,
        SeqEstimator::EpklChain,
        SeqEstimator::RmiChain,
        SeqEstimator::RmiJoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeqEstimator::EntropyJoint => "entropy_joint",
            SeqEstimator::EntropyChain => "entropy_chain",
            SeqEstimator::DataEntropyChain => "data_entropy_chain",
            SeqEstimator::MiChain => "mi_chain",
            SeqEstimator::EpklChain => "epkl_chain",
            SeqEstimator::RmiChain => "rmi_chain",
            SeqEstimator::RmiJoint => "rmi_joint",
        }
    }

    pub fn pick(self, t: &HypothesisTerms) -> f64 {
        match self {
            SeqEstimator::EntropyJoint => t.entropy_joint,
            SeqEstimator::EntropyChain => t.entropy_chain,
            SeqEstimator::DataEntropyChain => t.data_entropy_chain,
            SeqEstimator::MiChain => t.mi_chain,
            SeqEstimator::EpklChain => t.epkl_chain,
            SeqEstimator::RmiChain => t.rmi_chain,
            SeqEstimator::RmiJoint => t.rmi_joint,
        }
    }

    pub fn estimate<M: ConditionalModel>(
        self,
        ens: &Ensemble<M>,
        x: &[Token],
        set: &Weighted<'_>,
        cfg: &EstimatorConfig,
    ) -> Result<f64> {
        let terms = all_terms(ens, x, set.hypotheses, cfg)?;
        Ok(weighted_sum(self, &terms, &set.weights))
    }

    /// Mean and standard error over i.i.d. samples (uniform weights).
    pub fn mc_estimate<M: ConditionalModel>(
        self,
        ens: &Ensemble<M>,
        x: &[Token],
        samples: &[Hypothesis],
        cfg: &EstimatorConfig,
    ) -> Result<McEstimate> {
        if samples.is_empty() {
            return Err(Error::EmptyHypothesisSet);
        }
        let terms: Vec<f64> = all_terms(ens, x, samples, cfg)?
            .iter()
            .map(|t| self.pick(t))
            .collect();
        Ok(McEstimate::from_terms(&terms))
    }
}

fn weighted_sum(est: SeqEstimator, terms: &[HypothesisTerms], weights: &[f64]) -> f64 {
    terms
        .iter()
        .zip(weights)
        .map(|(t, w)| w * est.pick(t))
        .sum()
}

/// Joint-sequence entropy: `-sum_s w_s n_s ln P(y_s | x, D)`.
pub fn entropy_joint<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::EntropyJoint.estimate(ens, x, set, cfg)
}

/// Chain-rule entropy: token posterior entropies summed along hypotheses.
pub fn entropy_chain<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::EntropyChain.estimate(ens, x, set, cfg)
}

/// Chain-rule MI. Converges to the chain approximation, not to exact MI.
pub fn mi_chain<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::MiChain.estimate(ens, x, set, cfg)
}

pub fn epkl_chain<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::EpklChain.estimate(ens, x, set, cfg)
}

pub fn rmi_chain<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::RmiChain.estimate(ens, x, set, cfg)
}

/// Joint RMI: `mean_m sum_s w_s n_s [ln P(y_s | x, D) - ln P(y_s | x, m)]`.
pub fn rmi_joint<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    SeqEstimator::RmiJoint.estimate(ens, x, set, cfg)
}

/// Terms `n_s [ln P(y_s | m_s) - ln P(y_s | D)]` with `(m_s, y_s)` drawn by
/// [`crate::decode::sample_per_member`].
pub fn mi_exact_mc_terms<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    Ok(sample_members(ens, x, s, seed, false)?
        .iter()
        .map(|(m, _, h)| {
            let member_lp = member_seq_log_probs(&h.per_model);
            cfg.norm(h.len()) * (member_lp[*m] - h.log_posterior(cfg.posterior_choice))
        })
        .collect())
}

/// Terms `n_s [ln P(y_s | m_s) - ln P(y_s | m'_s)]` with an independent
/// second member `m'_s` per draw.
pub fn epkl_exact_mc_terms<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    Ok(sample_members(ens, x, s, seed, true)?
        .iter()
        .map(|(m, other, h)| {
            let member_lp = member_seq_log_probs(&h.per_model);
            cfg.norm(h.len()) * (member_lp[*m] - member_lp[*other])
        })
        .collect())
}

/// Sequence MI estimated by sampling each member individually.
pub fn mi_exact_mc<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    Ok(mean(&mi_exact_mc_terms(ens, x, s, seed, cfg)?))
}

/// Sequence EPKL estimated by sampling each member individually.
pub fn epkl_exact_mc<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    Ok(mean(&epkl_exact_mc_terms(ens, x, s, seed, cfg)?))
}

/// Sample count and seed for the per-member estimators in [`score_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactMc {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeqUncertainty {
    pub tu_chain: f64,
    pub tu_joint: f64,
    pub du_chain: f64,
    pub ku_mi_chain: f64,
    pub ku_epkl_chain: f64,
    pub ku_rmi_chain: f64,
    pub ku_rmi_joint: f64,
    pub ku_mi_exact_mc: Option<f64>,
    pub ku_epkl_exact_mc: Option<f64>,
    /// Some term hit a zero probability and was saturated.
    pub saturated: bool,
}

/// Every sequence-level measure over one weighted hypothesis set. A 1-best
/// score is a set holding the single top hypothesis.
pub fn score_sequence<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    set: &Weighted<'_>,
    cfg: &EstimatorConfig,
    exact_mc: Option<ExactMc>,
) -> Result<SeqUncertainty> {
    let terms = all_terms(ens, x, set.hypotheses, cfg)?;
    let w = &set.weights;
    let (mi_mc, epkl_mc) = match exact_mc {
        Some(e) => (
            Some(mi_exact_mc(ens, x, e.samples, e.seed, cfg)?),
            Some(epkl_exact_mc(ens, x, e.samples, e.seed, cfg)?),
        ),
        None => (None, None),
    };
    Ok(SeqUncertainty {
        tu_chain: weighted_sum(SeqEstimator::EntropyChain, &terms, w),
        tu_joint: weighted_sum(SeqEstimator::EntropyJoint, &terms, w),
        du_chain: weighted_sum(SeqEstimator::DataEntropyChain, &terms, w),
        ku_mi_chain: weighted_sum(SeqEstimator::MiChain, &terms, w),
        ku_epkl_chain: weighted_sum(SeqEstimator::EpklChain, &terms, w),
        ku_rmi_chain: weighted_sum(SeqEstimator::RmiChain, &terms, w),
        ku_rmi_joint: weighted_sum(SeqEstimator::RmiJoint, &terms, w),
        ku_mi_exact_mc: mi_mc,
        ku_epkl_exact_mc: epkl_mc,
        saturated: terms.iter().any(|t| t.saturated),
    })
}
