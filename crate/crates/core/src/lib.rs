//! Ensemble-based information-theoretic uncertainty for autoregressive
//! structured prediction.
//!
//! The crate works over small finite-support autoregressive models so that
//! every sequence-level quantity can also be computed exactly by enumerating
//! the hypothesis space:
//!
//! * [`toy`] builds seeded toy models, ensembles members and datasets.
//! * [`posterior`] combines members into token- and sequence-level
//!   predictive posteriors (product-of-expectations or expectation-of-products).
//! * [`decode`] produces hypotheses by beam search, ancestral sampling and
//!   exhaustive enumeration.
//! * [`token`] holds token-level entropy, MI, EPKL, RMI, log-score and
//!   negative point-wise MI.
//! * [`seq`] holds joint-sequence and chain-rule Monte-Carlo estimators and
//!   their importance-weighted beam counterparts.
//! * [`oracle`] computes the exact values every estimator targets.
//! * [`eval`] holds rejection curves, ROC-AUC, AUPR, WER alignment,
//!   sentence-BLEU and the heuristic ensemble-diversity baselines.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;

pub mod decode;
pub mod eval;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod seq;
pub mod token;
pub mod toy;

pub use error::{Error, Result};
pub use model::{ConditionalModel, TableModel, Token, TokenSeq, Vocab, EOS};
pub use posterior::{Combination, Ensemble};
