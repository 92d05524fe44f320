//! Evaluation tasks and heuristic baselines.

mod align;
mod bleu;
mod classify;
mod heuristic;
mod rejection;

pub use align::{align, token_error_labels, wer, AlignOp, Alignment};
pub use bleu::sentence_bleu;
pub use classify::{aupr, roc_auc, LabeledScores};
pub use heuristic::{cross_bleu, cross_wer, heuristic_variance, VarianceVariant};
pub use rejection::{rejection_prr, RejectionCurve};
