mod common;

use std::collections::BTreeMap;

use common::{small_spec, toy_ensemble};
use seq_uq::decode::{ancestral_sample, beam_search, enumerate_support, sample_per_member};
use seq_uq::math::exp;
use seq_uq::model::ConditionalModel;
use seq_uq::Combination;

const S: usize = 20_000;

fn frequencies(ys: impl Iterator<Item = Vec<u32>>) -> BTreeMap<Vec<u32>, usize> {
    let mut counts = BTreeMap::new();
    for y in ys {
        *counts.entry(y).or_insert(0) += 1;
    }
    counts
}

#[test]
fn ancestral_frequencies_match_posterior() {
    for c in Combination::ALL {
        let ens = toy_ensemble(small_spec(3, 4, 1.0, 1.0, 21), 3, c);
        let x = [2, 5];
        let counts = frequencies(ancestral_sample(&ens, &x, S, 4).unwrap().into_iter().map(|h| h.y.tokens));
        let mut chi2 = 0.0;
        let mut cells = 0;
        for entry in enumerate_support(&ens, &x).unwrap() {
            let p = exp(entry.log_posterior(c));
            let observed = *counts.get(&entry.y.tokens).unwrap_or(&0) as f64;
            let expected = p * S as f64;
            let se = (S as f64 * p * (1.0 - p)).sqrt();
            assert!((observed - expected).abs() <= 4.0 * se + 1e-9, "{:?}: {observed} vs {expected}", entry.y.tokens);
            if expected >= 5.0 {
                chi2 += (observed - expected).powi(2) / expected;
                cells += 1;
            }
        }
        // 99.9% quantile of chi-squared is below dof + 5 sqrt(2 dof) for these sizes
        let dof = (cells - 1) as f64;
        assert!(chi2 < dof + 5.0 * (2.0 * dof).sqrt(), "chi2 {chi2} with {dof} dof");
    }
}

#[test]
fn per_member_draws_follow_each_member() {
    let ens = toy_ensemble(small_spec(3, 3, 1.0, 1.5, 8), 2, Combination::PrEx);
    let x = [1];
    let draws = sample_per_member(&ens, &x, S, 9).unwrap();
    let picks = draws.iter().filter(|(m, _)| *m == 0).count() as f64;
    assert!((picks - S as f64 / 2.0).abs() < 4.0 * (S as f64 * 0.25).sqrt());
    for member in 0..2 {
        let ys: Vec<_> = draws.iter().filter(|(m, _)| *m == member).map(|(_, h)| h.y.clone()).collect();
        let n = ys.len() as f64;
        let counts = frequencies(ys.iter().map(|y| y.tokens.clone()));
        for entry in enumerate_support(&ens, &x).unwrap() {
            let p = exp(ens.members()[member].seq_log_prob(&x, &entry.y).unwrap());
            let observed = *counts.get(&entry.y.tokens).unwrap_or(&0) as f64;
            let se = (n * p * (1.0 - p)).sqrt();
            assert!((observed - n * p).abs() <= 4.0 * se + 1e-9);
        }
    }
}

#[test]
fn wide_beam_recovers_the_support() {
    let ens = toy_ensemble(small_spec(3, 3, 1.0, 1.0, 2), 2, Combination::PrEx);
    let support = enumerate_support(&ens, &[3]).unwrap();
    let beam = beam_search(&ens, &[3], support.len(), false).unwrap();
    assert_eq!(beam.hypotheses.len(), support.len());
    let total: f64 = beam.hypotheses.iter().map(|h| exp(h.log_post)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let lp: Vec<f64> = beam.hypotheses.iter().map(|h| h.log_post).collect();
    assert!(lp.windows(2).all(|w| w[0] >= w[1]));
}
