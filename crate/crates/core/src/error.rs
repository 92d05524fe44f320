use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("context of length {len} exceeds the forced-termination horizon (max_len = {max_len})")]
    ContextTooLong { len: usize, max_len: usize },
    #[error("sequence is not terminated by a single trailing EOS")]
    Unterminated,
    #[error("sequence of length {len} exceeds max_len = {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("token {token} is outside the vocabulary of size {size}")]
    TokenOutOfRange { token: u32, size: usize },
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("ensemble members disagree on {0}")]
    MemberMismatch(&'static str),
    #[error("impossible context: prefix has zero probability under every member")]
    ImpossibleContext,
    #[error("support too large: {size_k}^{max_len} exceeds the enumeration guard of {limit}; reduce size_k or max_len")]
    SupportTooLarge {
        size_k: usize,
        max_len: usize,
        limit: u64,
    },
    #[error("empty hypothesis set")]
    EmptyHypothesisSet,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(&'static str),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
}
