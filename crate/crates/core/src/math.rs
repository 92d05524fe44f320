//! Log-space probability arithmetic and small statistics helpers.

use alloc::vec::Vec;

/// Large finite stand-in for `+inf` used by measures that would otherwise
/// diverge on zero probabilities.
pub const SATURATED: f64 = 1e300;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `x * ln(x)` with the `0 * ln 0 = 0` convention.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * ln(x)
    } else {
        0.0
    }
}

/// Numerically stable `ln(sum(exp(v)))`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| exp(v - max)).sum();
    max + ln(sum)
}

/// `ln(mean(exp(v)))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - ln(values.len() as f64)
}

/// Softmax of `values / temperature`, computed in log space.
pub fn softmax(values: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
    let norm = log_sum_exp(&scaled);
    scaled.iter().map(|v| exp(v - norm)).collect()
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().copied().map(xlnx).sum::<f64>()
}

/// `KL(p || q)`; `None` when `q` assigns zero mass where `p` does not.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Option<f64> {
    let mut acc = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk > 0.0 {
            if qk <= 0.0 {
                return None;
            }
            acc += pk * (ln(pk) - ln(qk));
        }
    }
    Some(acc)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

/// Monte-Carlo estimate with its standard error, from i.i.d. per-draw terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
}

impl McEstimate {
    /// Sample mean and `s / sqrt(n)` with the unbiased sample deviation.
    pub fn from_terms(terms: &[f64]) -> Self {
        let n = terms.len();
        let value = mean(terms);
        let std_err = if n > 1 {
            let ss: f64 = terms.iter().map(|t| (t - value) * (t - value)).sum();
            sqrt(ss / (n - 1) as f64) / sqrt(n as f64)
        } else {
            0.0
        };
        McEstimate { value, std_err, n }
    }

    /// Distance to `target` in units of standard error. A zero standard
    /// error counts as within tolerance only for an exact (1e-12) match.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if self.std_err > 0.0 {
            diff / self.std_err
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}
