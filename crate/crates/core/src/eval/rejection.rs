use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionCurve {
    /// `(fraction rejected, mean residual error)` on the `N + 1` grid.
    pub points: Vec<(f64, f64)>,
    /// Area between the random baseline and the uncertainty curve.
    pub ar_uns: f64,
    /// Area between the random baseline and the oracle curve.
    pub ar_orc: f64,
    pub prr: f64,
    /// Every error is zero, so the oracle area vanishes and `prr` is 0.
    pub degenerate: bool,
}

/// Mean residual error after replacing the errors of the first `k` items of
/// `order` with zero, for `k = 0..=N`.
fn residual_curve(errors: &[f64], order: &[usize]) -> Vec<f64> {
    let n = errors.len() as f64;
    let mut remaining: f64 = errors.iter().sum();
    let mut curve = Vec::with_capacity(errors.len() + 1);
    curve.push(remaining / n);
    for &i in order {
        remaining -= errors[i];
        curve.push(remaining.max(0.0) / n);
    }
    curve
}

fn trapezoid(values: &[f64]) -> f64 {
    let h = 1.0 / (values.len() - 1) as f64;
    values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

/// Prediction rejection ratio. Items are rejected in order of descending
/// uncertainty (ties by index); a rejected item's error becomes zero.
pub fn rejection_prr(uncertainties: &[f64], errors: &[f64]) -> Result<RejectionCurve> {
    if uncertainties.len() != errors.len() {
        return Err(Error::LengthMismatch("uncertainties and errors"));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("rejection curves need at least 2 items"));
    }
    if errors.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidArgument("errors must be non-negative"));
    }
    let n = errors.len();
    let mut by_uncertainty: Vec<usize> = (0..n).collect();
    by_uncertainty.sort_by(|&a, &b| uncertainties[b].total_cmp(&uncertainties[a]).then(a.cmp(&b)));
    let mut by_error: Vec<usize> = (0..n).collect();
    by_error.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));

    let uns = residual_curve(errors, &by_uncertainty);
    let orc = residual_curve(errors, &by_error);
    let base = uns[0];
    // the random curve is linear, so its trapezoid area is exact
    let random_area = 0.5 * base;
    let ar_uns = random_area - trapezoid(&uns);
    let ar_orc = random_area - trapezoid(&orc);
    let degenerate = ar_orc <= 1e-12 * base;
    let prr = if degenerate { 0.0 } else { ar_uns / ar_orc };
    let points = uns
        .iter()
        .enumerate()
        .map(|(k, &e)| (k as f64 / n as f64, e))
        .collect();
    Ok(RejectionCurve {
        points,
        ar_uns,
        ar_orc,
        prr,
        degenerate,
    })
}
