//! Exact sequence-level quantities by enumerating the whole support.
//!
//! Rates use the per-sequence factor `n(y) = 1/|y|` inside the expectation
//! (or `1` without length normalization), so each target is literally the
//! large-sample limit of the matching estimator in [`crate::seq`].

use alloc::vec::Vec;

use crate::decode::enumerate_support;
use crate::math::{entropy, exp};
use crate::model::{ConditionalModel, Token};
use crate::posterior::{member_seq_log_probs, Ensemble};
use crate::seq::EstimatorConfig;
use crate::token::{tok_entropy, tok_epkl, tok_mi, tok_rmi};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExactQuantities {
    pub entropy_rate: f64,
    pub mi_rate: f64,
    pub epkl_rate: f64,
    pub rmi_rate: f64,
    /// Limit of the chain-rule MI estimator.
    pub mi_chain_target: f64,
    /// Limit of the chain-rule EPKL estimator.
    pub epkl_chain_target: f64,
    pub expected_data_entropy_rate: f64,
    /// Limit of the chain-rule entropy estimator; equals `entropy_rate`
    /// without length normalization.
    pub entropy_chain_target: f64,
    /// Limit of the chain-rule RMI estimator; equals `rmi_rate` without
    /// length normalization.
    pub rmi_chain_target: f64,
}

pub fn exact_all<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    cfg: &EstimatorConfig,
) -> Result<ExactQuantities> {
    let choice = cfg.posterior_choice;
    let m_count = ens.len() as f64;
    let mut q = ExactQuantities {
        entropy_rate: 0.0,
        mi_rate: 0.0,
        epkl_rate: 0.0,
        rmi_rate: 0.0,
        mi_chain_target: 0.0,
        epkl_chain_target: 0.0,
        expected_data_entropy_rate: 0.0,
        entropy_chain_target: 0.0,
        rmi_chain_target: 0.0,
    };

    for entry in enumerate_support(ens, x)? {
        let n = if cfg.length_normalize {
            1.0 / entry.y.len() as f64
        } else {
            1.0
        };
        let lp_post = entry.log_posterior(choice);
        let p_post = exp(lp_post);
        let lp_members = member_seq_log_probs(&entry.per_model);
        let p_members: Vec<f64> = lp_members.iter().map(|&lp| exp(lp)).collect();

        if p_post > 0.0 {
            q.entropy_rate -= p_post * n * lp_post;
        }
        for (m, (&p_m, &lp_m)) in p_members.iter().zip(&lp_members).enumerate() {
            if p_m > 0.0 {
                q.expected_data_entropy_rate -= p_m * n * lp_m / m_count;
                q.mi_rate += p_m * n * (lp_m - lp_post) / m_count;
                for (other, &lp_o) in lp_members.iter().enumerate() {
                    if other != m {
                        q.epkl_rate += p_m * n * (lp_m - lp_o) / (m_count * m_count);
                    }
                }
            }
            if p_post > 0.0 {
                q.rmi_rate += p_post * n * (lp_post - lp_m) / m_count;
            }
        }

        if p_post > 0.0 {
            let (mut h, mut mi, mut epkl, mut rmi) = (0.0, 0.0, 0.0, 0.0);
            for step in ens.trace(x, &entry.y)? {
                h += tok_entropy(&step, choice);
                mi += tok_mi(&step, choice);
                epkl += tok_epkl(&step).value;
                rmi += tok_rmi(&step, choice).value;
            }
            let w = p_post * n;
            q.entropy_chain_target += w * h;
            q.mi_chain_target += w * mi;
            q.epkl_chain_target += w * epkl;
            q.rmi_chain_target += w * rmi;
        }
    }
    Ok(q)
}

/// Total, data and knowledge uncertainty assembled from token-level
/// entropies: `tu` sums posterior token entropies along the posterior's
/// prefixes, `du` averages each member's own chain-rule entropy, `ku = tu - du`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainDecomposition {
    pub tu: f64,
    pub du: f64,
    pub ku: f64,
}

pub fn exact_token_chain_decomposition<M: ConditionalModel>(
    ens: &Ensemble<M>,
    x: &[Token],
    cfg: &EstimatorConfig,
) -> Result<ChainDecomposition> {
    let choice = cfg.posterior_choice;
    let m_count = ens.len() as f64;
    let (mut tu, mut du) = (0.0, 0.0);
    for entry in enumerate_support(ens, x)? {
        let n = if cfg.length_normalize {
            1.0 / entry.y.len() as f64
        } else {
            1.0
        };
        let p_post = exp(entry.log_posterior(choice));
        let p_members: Vec<f64> = member_seq_log_probs(&entry.per_model)
            .iter()
            .map(|&lp| exp(lp))
            .collect();
        if p_post == 0.0 && p_members.iter().all(|&p| p == 0.0) {
            continue;
        }
        let steps = ens.trace(x, &entry.y)?;
        tu += p_post * n * steps.iter().map(|s| tok_entropy(s, choice)).sum::<f64>();
        for (m, p_m) in p_members.iter().enumerate() {
            let h_m: f64 = steps.iter().map(|s| entropy(s.member(m))).sum();
            du += p_m * n * h_m / m_count;
        }
    }
    Ok(ChainDecomposition { tu, du, ku: tu - du })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TableModel, Vocab};
    use crate::posterior::Combination;
    use crate::toy::ToyModelSpec;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn cfg(ln: bool, c: Combination) -> EstimatorConfig {
        EstimatorConfig::new(1.0, ln, c).unwrap()
    }

    /// K = 2, max_len = 2: the support is {[EOS], [1, EOS]}, so every
    /// sequence probability is a single table entry.
    #[test]
    fn hand_enumerated_two_sequence_support() {
        let a = TableModel::from_fn(2, 2, |_| vec![0.6, 0.4]).unwrap();
        let b = TableModel::from_fn(2, 2, |_| vec![0.2, 0.8]).unwrap();
        let ens = Ensemble::new(vec![a, b], Combination::ExPr).unwrap();
        let q = exact_all(&ens, &[], &cfg(true, Combination::ExPr)).unwrap();

        let (pa, pb) = ([0.6f64, 0.4], [0.2f64, 0.8]);
        let pd = [0.4f64, 0.6];
        let n = [1.0, 0.5];
        let sum = |f: &dyn Fn(usize) -> f64| f(0) + f(1);
        let h = sum(&|i| -pd[i] * n[i] * pd[i].ln());
        let ed = 0.5 * sum(&|i| -pa[i] * n[i] * pa[i].ln()) + 0.5 * sum(&|i| -pb[i] * n[i] * pb[i].ln());
        let mi = 0.5 * sum(&|i| pa[i] * n[i] * (pa[i] / pd[i]).ln())
            + 0.5 * sum(&|i| pb[i] * n[i] * (pb[i] / pd[i]).ln());
        let epkl = 0.25 * sum(&|i| pa[i] * n[i] * (pa[i] / pb[i]).ln())
            + 0.25 * sum(&|i| pb[i] * n[i] * (pb[i] / pa[i]).ln());
        let rmi = 0.5 * sum(&|i| pd[i] * n[i] * (pd[i] / pa[i]).ln())
            + 0.5 * sum(&|i| pd[i] * n[i] * (pd[i] / pb[i]).ln());
        // only the first step is uncertain; the second is forced EOS
        let tok_mi = -(0.4f64 * 0.4f64.ln() + 0.6 * 0.6f64.ln())
            - 0.5 * (-(0.6f64 * 0.6f64.ln() + 0.4 * 0.4f64.ln()))
            - 0.5 * (-(0.2f64 * 0.2f64.ln() + 0.8 * 0.8f64.ln()));
        let tok_epkl = 0.25 * (0.6 * (3.0f64).ln() + 0.4 * (0.5f64).ln())
            + 0.25 * (0.2 * (1.0f64 / 3.0).ln() + 0.8 * (2.0f64).ln());
        let mi_chain = pd[0] * n[0] * tok_mi + pd[1] * n[1] * tok_mi;
        let epkl_chain = pd[0] * n[0] * tok_epkl + pd[1] * n[1] * tok_epkl;

        assert_abs_diff_eq!(q.entropy_rate, h, epsilon = 1e-14);
        assert_abs_diff_eq!(q.expected_data_entropy_rate, ed, epsilon = 1e-14);
        assert_abs_diff_eq!(q.mi_rate, mi, epsilon = 1e-14);
        assert_abs_diff_eq!(q.epkl_rate, epkl, epsilon = 1e-14);
        assert_abs_diff_eq!(q.rmi_rate, rmi, epsilon = 1e-14);
        assert_abs_diff_eq!(q.mi_chain_target, mi_chain, epsilon = 1e-14);
        assert_abs_diff_eq!(q.epkl_chain_target, epkl_chain, epsilon = 1e-14);
    }

    #[test]
    fn identical_and_single_members() {
        let spec = ToyModelSpec {
            vocab: Vocab::new(3, 6).unwrap(),
            context_order_c: 1,
            max_len: 4,
            sharpness_tau: 1.0,
            disagreement_sigma_id: 0.0,
            disagreement_sigma_ood: 0.0,
            base_seed: 5,
        };
        let single = Ensemble::toy(spec, 1, Combination::ExPr).unwrap();
        let triple = Ensemble::toy(spec, 3, Combination::ExPr).unwrap();
        for c in Combination::ALL {
            let one = exact_all(&single, &[1], &cfg(true, c)).unwrap();
            let three = exact_all(&triple, &[1], &cfg(true, c)).unwrap();
            for q in [one, three] {
                assert!(q.mi_rate.abs() < 1e-12);
                assert!(q.epkl_rate.abs() < 1e-12);
                assert!(q.rmi_rate.abs() < 1e-12);
            }
            assert_abs_diff_eq!(one.entropy_rate, three.entropy_rate, epsilon = 1e-12);
        }
    }

    #[test]
    fn deterministic_members_decompose_to_zero() {
        let spec = ToyModelSpec {
            vocab: Vocab::new(3, 6).unwrap(),
            context_order_c: 1,
            max_len: 3,
            sharpness_tau: 1e6,
            disagreement_sigma_id: 0.0,
            disagreement_sigma_ood: 0.0,
            base_seed: 5,
        };
        let ens = Ensemble::toy(spec, 2, Combination::ExPr).unwrap();
        let d = exact_token_chain_decomposition(&ens, &[1], &cfg(false, Combination::ExPr)).unwrap();
        assert!(d.tu.abs() < 1e-9 && d.du.abs() < 1e-9 && d.ku.abs() < 1e-9);
    }

    #[test]
    fn unnormalized_entropy_chain_rule() {
        let spec = ToyModelSpec {
            vocab: Vocab::new(4, 6).unwrap(),
            context_order_c: 2,
            max_len: 4,
            sharpness_tau: 1.2,
            disagreement_sigma_id: 1.0,
            disagreement_sigma_ood: 1.0,
            base_seed: 9,
        };
        let ens = Ensemble::toy(spec, 3, Combination::PrEx).unwrap();
        for c in Combination::ALL {
            let q = exact_all(&ens, &[2], &cfg(false, c)).unwrap();
            assert_abs_diff_eq!(q.entropy_rate, q.entropy_chain_target, epsilon = 1e-9);
            assert_abs_diff_eq!(q.rmi_rate, q.rmi_chain_target, epsilon = 1e-9);
            assert!(q.rmi_rate >= 0.0);
        }
    }
}
