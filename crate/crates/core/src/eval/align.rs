use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Token, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AlignOp {
    Match { ref_index: usize, hyp_index: usize },
    Substitution { ref_index: usize, hyp_index: usize },
    /// A reference token missing from the hypothesis.
    Deletion { ref_index: usize },
    /// A hypothesis token absent from the reference.
    Insertion { hyp_index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub ref_len: usize,
    pub hyp_len: usize,
}

impl Alignment {
    pub fn edits(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| !matches!(op, AlignOp::Match { .. }))
            .count()
    }
}

/// Minimum-edit alignment of the EOS-stripped contents.
pub fn align(reference: &TokenSeq, hypothesis: &TokenSeq) -> Alignment {
    align_tokens(reference.content(), hypothesis.content())
}

pub(crate) fn align_tokens(r: &[Token], h: &[Token]) -> Alignment {
    let (n, m) = (r.len(), h.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d.iter_mut().take(w).enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && r[i - 1] == h[j - 1] && d[(i - 1) * w + j - 1] == here {
            ops.push(AlignOp::Match { ref_index: i - 1, hyp_index: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[(i - 1) * w + j - 1] + 1 == here {
            ops.push(AlignOp::Substitution { ref_index: i - 1, hyp_index: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(AlignOp::Deletion { ref_index: i - 1 });
            i -= 1;
        } else {
            ops.push(AlignOp::Insertion { hyp_index: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops, ref_len: n, hyp_len: m }
}

/// Edits divided by the reference length (an empty reference counts as 1).
pub fn wer(reference: &TokenSeq, hypothesis: &TokenSeq) -> f64 {
    let a = align(reference, hypothesis);
    a.edits() as f64 / a.ref_len.max(1) as f64
}

/// One label per hypothesis token: 1 for substitutions and insertions.
pub fn token_error_labels(alignment: &Alignment) -> Vec<u8> {
    let mut labels = vec![0u8; alignment.hyp_len];
    for op in &alignment.ops {
        match *op {
            AlignOp::Substitution { hyp_index, .. } | AlignOp::Insertion { hyp_index } => {
                labels[hyp_index] = 1
            }
            AlignOp::Match { .. } | AlignOp::Deletion { .. } => {}
        }
    }
    labels
}
