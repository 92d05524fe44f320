//! Hypothesis generation: beam search, ancestral sampling, per-member
//! sampling and exhaustive enumeration of the finite support.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::ln;
use crate::model::{ConditionalModel, Token, TokenSeq, EOS};
use crate::posterior::{seq_log_posterior_from_matrix, Combination, Ensemble};
use crate::token::TokenStep;
use crate::{Error, Result};

/// Largest `K^max_len` that [`enumerate_support`] accepts.
pub const SUPPORT_GUARD: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hypothesis {
    pub y: TokenSeq,
    /// Log-probability under the decoding posterior.
    pub log_post: f64,
    /// `L x M` token log-probabilities.
    pub per_model: Vec<Vec<f64>>,
    pub rank: usize,
}

impl Hypothesis {
    pub fn build<M: ConditionalModel>(
        ens: &Ensemble<M>,
        x: &[Token],
        y: TokenSeq,
        rank: usize,
    ) -> Result<Self> {
        let per_model = ens.per_model_token_logprobs(x, &y)?;
        let log_post = seq_log_posterior_from_matrix(&per_model, ens.combination);
        Ok(Hypothesis {
            y,
            log_post,
            per_model,
            rank,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Log-probability under either combination, from the stored matrix.
    pub fn log_posterior(&self, choice: Combination) -> f64 {
        seq_log_posterior_from_matrix(&self.per_model, choice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub hypotheses: Vec<Hypothesis>,
    pub width_b: usize,
}

impl Beam {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

struct Partial {
    tokens: Vec<Token>,
    log_prefix: Vec<f64>,
    score: f64,
}

fn candidate_order(a: &(f64, &[Token], Token), b: &(f64, &[Token], Token)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.2.cmp(&b.2))
        .then_with(|| a.1.cmp(b.1))
}

/// Beam search over the token posterior selected by `ens.combination`.
///
/// Each step ranks every extension of every live prefix by cumulative
/// log-probability (ties: smaller token, then lexicographically smaller
/// prefix) and keeps the best `width_b`; extensions ending in EOS move to the
/// finished pool. Search stops once the pool holds `width_b` hypotheses or no
/// live prefix remains. The pool is ranked by `log_post / L` when
/// `rank_length_norm` is set, else by `log_post`.
pub fn beam_search<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    width_b: usize,
    rank_length_norm: bool,
) -> Result<Beam> {
    if width_b == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1"));
    }
    let choice = ens.combination;
    let mut live = vec![Partial {
        tokens: Vec::new(),
        log_prefix: vec![0.0; ens.len()],
        score: 0.0,
    }];
    let mut finished: Vec<TokenSeq> = Vec::new();

    while !live.is_empty() && finished.len() < width_b {
        let mut steps = Vec::with_capacity(live.len());
        for p in &live {
            steps.push(ens.step(x, &p.tokens, &p.log_prefix)?);
        }
        let mut candidates: Vec<(f64, &[Token], Token, usize)> = Vec::new();
        for (i, (p, step)) in live.iter().zip(&steps).enumerate() {
            for (k, &prob) in step.posterior(choice).iter().enumerate() {
                if prob > 0.0 {
                    candidates.push((p.score + ln(prob), &p.tokens, k as Token, i));
                }
            }
        }
        candidates.sort_by(|a, b| candidate_order(&(a.0, a.1, a.2), &(b.0, b.1, b.2)));
        candidates.truncate(width_b);

        let mut next = Vec::with_capacity(candidates.len());
        for (score, _, token, i) in candidates {
            let mut tokens = live[i].tokens.clone();
            tokens.push(token);
            if token == EOS {
                finished.push(TokenSeq::terminated(tokens)?);
            } else {
                let log_prefix = live[i]
                    .log_prefix
                    .iter()
                    .enumerate()
                    .map(|(m, lp)| lp + ln(steps[i].member(m)[token as usize]))
                    .collect();
                next.push(Partial {
                    tokens,
                    log_prefix,
                    score,
                });
            }
        }
        live = next;
    }

    let mut hypotheses = finished
        .into_iter()
        .map(|y| Hypothesis::build(ens, x, y, 0))
        .collect::<Result<Vec<_>>>()?;
    let key = |h: &Hypothesis| {
        if rank_length_norm {
            h.log_post / h.len() as f64
        } else {
            h.log_post
        }
    };
    hypotheses.sort_by(|a, b| {
        key(b)
            .total_cmp(&key(a))
            .then_with(|| a.y.tokens.cmp(&b.y.tokens))
    });
    hypotheses.truncate(width_b);
    for (rank, h) in hypotheses.iter_mut().enumerate() {
        h.rank = rank;
    }
    Ok(Beam {
        hypotheses,
        width_b,
    })
}

/// Index of the category containing `u` in the cumulative distribution,
/// skipping zero-probability entries.
fn categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &pk) in p.iter().enumerate() {
        if pk > 0.0 {
            acc += pk;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Memoizes steps and built hypotheses by prefix within one sampling call.
struct Sampler<'a, M> {
    ens: &'a Ensemble<M>,
    x: &'a [Token],
    steps: BTreeMap<(usize, Vec<Token>), TokenStep>,
    built: BTreeMap<Vec<Token>, Hypothesis>,
}

impl<'a, M: ConditionalModel> Sampler<'a, M> {
    fn new(ens: &'a Ensemble<M>, x: &'a [Token]) -> Self {
        Sampler {
            ens,
            x,
            steps: BTreeMap::new(),
            built: BTreeMap::new(),
        }
    }

    fn step(&mut self, member: Option<usize>, prefix: &[Token]) -> Result<&TokenStep> {
        let key = (member.map_or(0, |m| m + 1), prefix.to_vec());
        if !self.steps.contains_key(&key) {
            let step = match member {
                Some(m) => {
                    let dist = self.ens.members()[m].cond_dist(self.x, prefix)?;
                    TokenStep::from_flat(dist.len(), dist)
                }
                None => {
                    let log_prefix = self.ens_log_prefix(prefix)?;
                    self.ens.step(self.x, prefix, &log_prefix)?
                }
            };
            self.steps.insert(key.clone(), step);
        }
        Ok(&self.steps[&key])
    }

    fn ens_log_prefix(&mut self, prefix: &[Token]) -> Result<Vec<f64>> {
        let mut lp = vec![0.0; self.ens.len()];
        for l in 0..prefix.len() {
            let step = self.step(None, &prefix[..l])?;
            for (m, v) in lp.iter_mut().enumerate() {
                *v += ln(step.member(m)[prefix[l] as usize]);
            }
        }
        Ok(lp)
    }

    /// Draws one sequence from the ensemble posterior (`member = None`) or
    /// from a single member.
    fn draw<R: Rng>(&mut self, member: Option<usize>, rng: &mut R) -> Result<Vec<Token>> {
        let choice = self.ens.combination;
        let mut tokens = Vec::new();
        loop {
            let u: f64 = rng.random();
            let step = self.step(member, &tokens)?;
            let k = categorical(step.posterior(choice), u) as Token;
            tokens.push(k);
            if k == EOS {
                return Ok(tokens);
            }
        }
    }

    fn hypothesis(&mut self, tokens: Vec<Token>, rank: usize) -> Result<Hypothesis> {
        if let Some(h) = self.built.get(&tokens) {
            let mut h = h.clone();
            h.rank = rank;
            return Ok(h);
        }
        let h = Hypothesis::build(self.ens, self.x, TokenSeq::terminated(tokens.clone())?, rank)?;
        self.built.insert(tokens, h.clone());
        Ok(h)
    }
}

pub(crate) fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `s` i.i.d. draws from the selected sequence posterior. Draw `i` uses RNG
/// stream `i` of `seed`.
pub fn ancestral_sample<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
) -> Result<Vec<Hypothesis>> {
    if s == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1"));
    }
    let mut sampler = Sampler::new(ens, x);
    (0..s)
        .map(|i| {
            let mut rng = draw_rng(seed, i);
            let tokens = sampler.draw(None, &mut rng)?;
            sampler.hypothesis(tokens, i)
        })
        .collect()
}

/// Draw `i`: a member uniformly at random, then a sequence from that member
/// alone. Hypotheses carry the ensemble log-posterior.
pub fn sample_per_member<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
) -> Result<Vec<(usize, Hypothesis)>> {
    Ok(sample_members(ens, x, s, seed, false)?
        .into_iter()
        .map(|(m, _, h)| (m, h))
        .collect())
}

/// Shared by [`sample_per_member`] and the EPKL estimator: the optional second
/// member is drawn after the sequence, so `(member, sequence)` pairs agree.
pub(crate) fn sample_members<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    s: usize,
    seed: u64,
    second_member: bool,
) -> Result<Vec<(usize, usize, Hypothesis)>> {
    if s == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1"));
    }
    let m_count = ens.len();
    let mut sampler = Sampler::new(ens, x);
    (0..s)
        .map(|i| {
            let mut rng = draw_rng(seed, i);
            let m = rng.random_range(0..m_count);
            let tokens = sampler.draw(Some(m), &mut rng)?;
            let other = if second_member {
                rng.random_range(0..m_count)
            } else {
                m
            };
            Ok((m, other, sampler.hypothesis(tokens, i)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportEntry {
    pub y: TokenSeq,
    pub log_post_prex: f64,
    pub log_post_expr: f64,
    pub per_model: Vec<Vec<f64>>,
}

impl SupportEntry {
    pub fn log_posterior(&self, choice: Combination) -> f64 {
        match choice {
            Combination::PrEx => self.log_post_prex,
            Combination::ExPr => self.log_post_expr,
        }
    }
}

/// Every terminated sequence of at most `max_len` tokens, in lexicographic
/// token order.
pub fn enumerate_support<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
) -> Result<Vec<SupportEntry>> {
    let (k, max_len) = (ens.size_k(), ens.max_len());
    let within_guard = (k as u64)
        .checked_pow(max_len as u32)
        .is_some_and(|n| n <= SUPPORT_GUARD);
    if !within_guard {
        return Err(Error::SupportTooLarge {
            size_k: k,
            max_len,
            limit: SUPPORT_GUARD,
        });
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    let mut rows = Vec::new();
    extend_support(ens, x, &mut prefix, &mut rows, &mut out)?;
    Ok(out)
}

fn extend_support<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    prefix: &mut Vec<Token>,
    rows: &mut Vec<Vec<f64>>,
    out: &mut Vec<SupportEntry>,
) -> Result<()> {
    let k = ens.size_k();
    let dists = ens.member_dists(x, prefix)?;
    let last = prefix.len() + 1 == ens.max_len();
    for t in 0..k {
        if last && t != EOS as usize {
            break;
        }
        rows.push(dists.chunks_exact(k).map(|d| ln(d[t])).collect());
        prefix.push(t as Token);
        if t == EOS as usize {
            out.push(SupportEntry {
                y: TokenSeq::terminated(prefix.clone())?,
                log_post_prex: seq_log_posterior_from_matrix(rows, Combination::PrEx),
                log_post_expr: seq_log_posterior_from_matrix(rows, Combination::ExPr),
                per_model: rows.clone(),
            });
        } else {
            extend_support(ens, x, prefix, rows, out)?;
        }
        prefix.pop();
        rows.pop();
    }
    Ok(())
}
