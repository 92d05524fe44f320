#![allow(dead_code)]

use seq_uq::model::Vocab;
use seq_uq::toy::{ToyModel, ToyModelSpec};
use seq_uq::{Combination, Ensemble};

/// A small seeded toy spec whose support stays enumerable.
pub fn small_spec(size_k: usize, max_len: usize, tau: f64, sigma: f64, seed: u64) -> ToyModelSpec {
    ToyModelSpec {
        vocab: Vocab::new(size_k, 6).unwrap(),
        context_order_c: 2,
        max_len,
        sharpness_tau: tau,
        disagreement_sigma_id: sigma,
        disagreement_sigma_ood: sigma,
        base_seed: seed,
    }
}

pub fn toy_ensemble(spec: ToyModelSpec, m: usize, c: Combination) -> Ensemble<ToyModel> {
    Ensemble::toy(spec, m, c).unwrap()
}
