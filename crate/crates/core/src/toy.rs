//! Seeded finite-support toy models and synthetic datasets.
//!
//! A member's logits at a step are
//! `tau * (g_base + sigma * g_member)`, where both terms are standard normal
//! draws from a keyed hash of `(seed, input, last c target tokens, position,
//! token)` and `g_member` is additionally keyed by the member index. `tau`
//! controls data uncertainty (sharpness) and `sigma` controls how much the
//! members disagree; `sigma` is `sigma_id` or `sigma_ood` depending on the
//! input's domain.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{exp, ln, sqrt};
use crate::model::{ConditionalModel, Token, TokenSeq, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyModelSpec {
    pub vocab: Vocab,
    /// Markov order over the target history.
    pub context_order_c: usize,
    /// Forced-EOS horizon; sequences have at most this many tokens.
    pub max_len: usize,
    pub sharpness_tau: f64,
    pub disagreement_sigma_id: f64,
    pub disagreement_sigma_ood: f64,
    pub base_seed: u64,
}

impl ToyModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        if self.max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be at least 1"));
        }
        if !(self.sharpness_tau > 0.0) || !self.sharpness_tau.is_finite() {
            return Err(Error::InvalidArgument("sharpness_tau must be positive"));
        }
        if !(self.disagreement_sigma_id >= 0.0) || !(self.disagreement_sigma_ood >= 0.0) {
            return Err(Error::InvalidArgument("disagreement sigmas must be non-negative"));
        }
        Ok(())
    }
}

/// One seeded ensemble member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModel {
    pub spec: ToyModelSpec,
    pub member_index: usize,
}

pub fn build_member(spec: ToyModelSpec, member_index: usize) -> ToyModel {
    ToyModel { spec, member_index }
}

impl ConditionalModel for ToyModel {
    fn size_k(&self) -> usize {
        self.spec.vocab.size_k
    }

    fn max_len(&self) -> usize {
        self.spec.max_len
    }

    fn free_dist_into(&self, x: &[Token], context: &[Token], out: &mut [f64]) {
        let spec = &self.spec;
        let sigma = if spec.vocab.is_ood(x) {
            spec.disagreement_sigma_ood
        } else {
            spec.disagreement_sigma_id
        };
        let window = &context[context.len().saturating_sub(spec.context_order_c)..];
        let mut key = mix(spec.base_seed ^ 0x243f_6a88_85a3_08d3);
        key = mix(key ^ hash_tokens(x));
        key = mix(key ^ hash_tokens(window));
        key = mix(key ^ (context.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let member_key = mix(key ^ (self.member_index as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03));

        for (k, slot) in out.iter_mut().enumerate() {
            let base = gaussian(mix(key ^ (k as u64 + 1)));
            let noise = if sigma > 0.0 {
                sigma * gaussian(mix(member_key ^ (k as u64 + 1)))
            } else {
                0.0
            };
            *slot = spec.sharpness_tau * (base + noise);
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in out.iter_mut() {
            *v = exp(*v - max);
            total += *v;
        }
        for v in out.iter_mut() {
            *v /= total;
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_tokens(tokens: &[Token]) -> u64 {
    tokens
        .iter()
        .fold(mix(tokens.len() as u64), |h, &t| mix(h ^ (t as u64 + 0x51)))
}

/// Uniform on the open interval (0, 1).
fn unit(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn gaussian(h: u64) -> f64 {
    let u1 = unit(h);
    let u2 = unit(mix(h ^ 0x6a09_e667_f3bc_c909));
    sqrt(-2.0 * ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Domain {
    InDomain,
    OutOfDomain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSpec {
    pub n_inputs: usize,
    pub input_len_range: (usize, usize),
    pub domain_label: Domain,
    pub seed: u64,
}

/// Draws source sequences; in-domain tokens come from `[0, V/2)` and
/// out-of-domain tokens from `[V/2, V)`. Input `i` uses RNG stream `i`.
pub fn generate_dataset(dspec: &DatasetSpec, vocab: &Vocab) -> Result<Vec<TokenSeq>> {
    vocab.validate()?;
    let (lo, hi) = dspec.input_len_range;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument("input_len_range must satisfy 1 <= min <= max"));
    }
    let split = vocab.ood_start();
    let (tok_lo, tok_hi) = match dspec.domain_label {
        Domain::InDomain => (0, split),
        Domain::OutOfDomain => (split, vocab.source_size_v as Token),
    };
    let inputs = (0..dspec.n_inputs)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(dspec.seed);
            rng.set_stream(i as u64);
            let len = rng.random_range(lo..=hi);
            let tokens = (0..len).map(|_| rng.random_range(tok_lo..tok_hi)).collect();
            TokenSeq::open(tokens)
        })
        .collect();
    Ok(inputs)
}
