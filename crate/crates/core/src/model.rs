//! Vocabulary, token sequences and the conditional-model abstraction.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::ln;
use crate::{Error, Result};

pub type Token = u32;

/// End-of-sequence token. It is a member of every target vocabulary.
pub const EOS: Token = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vocab {
    /// Target vocabulary size, EOS included.
    pub size_k: usize,
    pub eos_id: Token,
    /// Source (input) vocabulary size.
    pub source_size_v: usize,
}

impl Vocab {
    pub fn new(size_k: usize, source_size_v: usize) -> Result<Self> {
        let v = Vocab {
            size_k,
            eos_id: EOS,
            source_size_v,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size_k < 2 {
            return Err(Error::InvalidArgument("size_k must be at least 2"));
        }
        if self.eos_id != EOS {
            return Err(Error::InvalidArgument("eos_id must be 0"));
        }
        if self.source_size_v < 2 {
            return Err(Error::InvalidArgument("source_size_v must be at least 2"));
        }
        Ok(())
    }

    /// First source token of the reserved out-of-domain sub-range.
    pub fn ood_start(&self) -> Token {
        (self.source_size_v / 2) as Token
    }

    /// An input is out-of-domain when most of its tokens fall in the
    /// reserved sub-range `[V/2, V)`.
    pub fn is_ood(&self, x: &[Token]) -> bool {
        let start = self.ood_start();
        let ood = x.iter().filter(|&&t| t >= start).count();
        2 * ood > x.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
    pub terminated: bool,
}

impl TokenSeq {
    /// A target sequence ending in its only EOS.
    pub fn terminated(tokens: Vec<Token>) -> Result<Self> {
        match tokens.iter().position(|&t| t == EOS) {
            Some(i) if i + 1 == tokens.len() => Ok(TokenSeq {
                tokens,
                terminated: true,
            }),
            _ => Err(Error::Unterminated),
        }
    }

    /// A source sequence or an unfinished prefix.
    pub fn open(tokens: Vec<Token>) -> Self {
        TokenSeq {
            tokens,
            terminated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens with the trailing EOS removed.
    pub fn content(&self) -> &[Token] {
        match self.tokens.last() {
            Some(&EOS) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// An autoregressive model `P(y_l | y_<l, x)` with finite support.
///
/// Implementors provide the unconstrained conditional; [`cond_dist_into`]
/// applies forced termination at position `max_len - 1`, so every model has
/// support on sequences of at most `max_len` tokens (EOS included).
///
/// [`cond_dist_into`]: ConditionalModel::cond_dist_into
pub trait ConditionalModel {
    fn size_k(&self) -> usize;

    fn max_len(&self) -> usize;

    /// Writes the conditional distribution for a context shorter than
    /// `max_len - 1` into `out` (length `size_k`).
    fn free_dist_into(&self, x: &[Token], context: &[Token], out: &mut [f64]);

    fn cond_dist_into(&self, x: &[Token], context: &[Token], out: &mut [f64]) -> Result<()> {
        let max_len = self.max_len();
        if context.len() >= max_len {
            return Err(Error::ContextTooLong {
                len: context.len(),
                max_len,
            });
        }
        if context.len() + 1 == max_len {
            out.fill(0.0);
            out[EOS as usize] = 1.0;
        } else {
            self.free_dist_into(x, context, out);
        }
        Ok(())
    }

    fn cond_dist(&self, x: &[Token], context: &[Token]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size_k()];
        self.cond_dist_into(x, context, &mut out)?;
        Ok(out)
    }

    /// Per-position `ln P(y_l | y_<l, x)` along a terminated sequence.
    fn token_log_probs(&self, x: &[Token], y: &TokenSeq) -> Result<Vec<f64>> {
        check_target(y, self.size_k(), self.max_len())?;
        let mut dist = vec![0.0; self.size_k()];
        let mut out = Vec::with_capacity(y.len());
        for l in 0..y.len() {
            self.cond_dist_into(x, &y.tokens[..l], &mut dist)?;
            out.push(ln(dist[y.tokens[l] as usize]));
        }
        Ok(out)
    }

    fn seq_log_prob(&self, x: &[Token], y: &TokenSeq) -> Result<f64> {
        Ok(self.token_log_probs(x, y)?.iter().sum())
    }
}

impl<M: ConditionalModel + ?Sized> ConditionalModel for &M {
    fn size_k(&self) -> usize {
        (**self).size_k()
    }
    fn max_len(&self) -> usize {
        (**self).max_len()
    }
    fn free_dist_into(&self, x: &[Token], context: &[Token], out: &mut [f64]) {
        (**self).free_dist_into(x, context, out)
    }
}

pub(crate) fn check_target(y: &TokenSeq, size_k: usize, max_len: usize) -> Result<()> {
    if !y.terminated || y.tokens.last() != Some(&EOS) {
        return Err(Error::Unterminated);
    }
    if y.len() > max_len {
        return Err(Error::SequenceTooLong {
            len: y.len(),
            max_len,
        });
    }
    if let Some(&t) = y.tokens.iter().find(|&&t| t as usize >= size_k) {
        return Err(Error::TokenOutOfRange { token: t, size: size_k });
    }
    Ok(())
}

/// A model given by an explicit table of conditionals, keyed by the target
/// prefix and independent of the input. Used for hand-constructed ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    size_k: usize,
    max_len: usize,
    table: BTreeMap<Vec<Token>, Vec<f64>>,
}

impl TableModel {
    /// Builds the table by calling `f` on every reachable non-forced context
    /// (EOS-free prefixes shorter than `max_len - 1`).
    pub fn from_fn<F>(size_k: usize, max_len: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[Token]) -> Vec<f64>,
    {
        if size_k < 2 {
            return Err(Error::InvalidArgument("size_k must be at least 2"));
        }
        if max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be positive"));
        }
        let mut table = BTreeMap::new();
        let mut frontier: Vec<Vec<Token>> = vec![Vec::new()];
        while let Some(ctx) = frontier.pop() {
            if ctx.len() + 1 >= max_len {
                continue;
            }
            let dist = f(&ctx);
            if dist.len() != size_k {
                return Err(Error::LengthMismatch("table row length must equal size_k"));
            }
            let total: f64 = dist.iter().sum();
            if dist.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("table row is not a distribution"));
            }
            for t in 1..size_k as Token {
                let mut next = ctx.clone();
                next.push(t);
                frontier.push(next);
            }
            table.insert(ctx, dist);
        }
        Ok(TableModel {
            size_k,
            max_len,
            table,
        })
    }
}

impl ConditionalModel for TableModel {
    fn size_k(&self) -> usize {
        self.size_k
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    /// Unreachable contexts (containing EOS) fall back to uniform.
    fn free_dist_into(&self, _x: &[Token], context: &[Token], out: &mut [f64]) {
        match self.table.get(context) {
            Some(row) => out.copy_from_slice(row),
            None => out.fill(1.0 / self.size_k as f64),
        }
    }
}
