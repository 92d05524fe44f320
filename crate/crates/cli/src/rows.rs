//! CSV row layouts.

use serde::{Deserialize, Serialize};

use seq_uq::oracle::ExactQuantities;
use seq_uq::seq::SeqUncertainty;
use seq_uq::Token;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: usize,
    pub combination: String,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub length_norm: bool,
    pub tu_chain: f64,
    pub tu_joint: f64,
    pub du_chain: f64,
    pub ku_mi_chain: f64,
    pub ku_epkl_chain: f64,
    pub ku_rmi_chain: f64,
    pub ku_rmi_joint: f64,
    pub ku_mi_exact_mc: Option<f64>,
    pub ku_epkl_exact_mc: Option<f64>,
}

/// Column names of the sequence measures, in file order.
pub const SEQ_MEASURES: [&str; 9] = [
    "tu_chain",
    "tu_joint",
    "du_chain",
    "ku_mi_chain",
    "ku_epkl_chain",
    "ku_rmi_chain",
    "ku_rmi_joint",
    "ku_mi_exact_mc",
    "ku_epkl_exact_mc",
];

pub fn seq_measure_values(u: &SeqUncertainty) -> [Option<f64>; 9] {
    [
        Some(u.tu_chain),
        Some(u.tu_joint),
        Some(u.du_chain),
        Some(u.ku_mi_chain),
        Some(u.ku_epkl_chain),
        Some(u.ku_rmi_chain),
        Some(u.ku_rmi_joint),
        u.ku_mi_exact_mc,
        u.ku_epkl_exact_mc,
    ]
}

impl ScoreRow {
    pub fn new(id: usize, combination: &str, b: usize, t: f64, length_norm: bool, u: &SeqUncertainty) -> Self {
        ScoreRow {
            id,
            combination: combination.to_string(),
            b,
            t,
            length_norm,
            tu_chain: u.tu_chain,
            tu_joint: u.tu_joint,
            du_chain: u.du_chain,
            ku_mi_chain: u.ku_mi_chain,
            ku_epkl_chain: u.ku_epkl_chain,
            ku_rmi_chain: u.ku_rmi_chain,
            ku_rmi_joint: u.ku_rmi_joint,
            ku_mi_exact_mc: u.ku_mi_exact_mc,
            ku_epkl_exact_mc: u.ku_epkl_exact_mc,
        }
    }

    pub fn measures(&self) -> [Option<f64>; 9] {
        [
            Some(self.tu_chain),
            Some(self.tu_joint),
            Some(self.du_chain),
            Some(self.ku_mi_chain),
            Some(self.ku_epkl_chain),
            Some(self.ku_rmi_chain),
            Some(self.ku_rmi_joint),
            self.ku_mi_exact_mc,
            self.ku_epkl_exact_mc,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRow {
    pub id: usize,
    pub combination: String,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub var_p: f64,
    pub var_p_norm: f64,
    pub var_lnp: f64,
    pub var_lnp_norm: f64,
    pub cross_wer: Option<f64>,
    pub cross_bleu: Option<f64>,
}

pub const HEURISTIC_MEASURES: [&str; 6] = [
    "var_p",
    "var_p_norm",
    "var_lnp",
    "var_lnp_norm",
    "cross_wer",
    "cross_bleu",
];

impl HeuristicRow {
    pub fn measures(&self) -> [Option<f64>; 6] {
        [
            Some(self.var_p),
            Some(self.var_p_norm),
            Some(self.var_lnp),
            Some(self.var_lnp_norm),
            self.cross_wer,
            self.cross_bleu,
        ]
    }
}

/// Token measures along the 1-best hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRow {
    pub id: usize,
    pub combination: String,
    pub position: usize,
    pub token: Token,
    pub entropy: f64,
    pub mi: f64,
    pub epkl: f64,
    pub rmi: f64,
    pub score: f64,
    pub npmi: f64,
}

pub const TOKEN_MEASURES: [&str; 6] = ["entropy", "mi", "epkl", "rmi", "score", "npmi"];

impl TokenRow {
    pub fn measures(&self) -> [f64; 6] {
        [self.entropy, self.mi, self.epkl, self.rmi, self.score, self.npmi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub measure: String,
    pub combination: String,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub length_norm: Option<bool>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub id: usize,
    pub combination: String,
    pub length_norm: bool,
    pub entropy_rate: f64,
    pub mi_rate: f64,
    pub epkl_rate: f64,
    pub rmi_rate: f64,
    pub expected_data_entropy_rate: f64,
    pub entropy_chain_target: f64,
    pub mi_chain_target: f64,
    pub epkl_chain_target: f64,
    pub rmi_chain_target: f64,
}

impl ExactRow {
    pub fn new(id: usize, combination: &str, length_norm: bool, q: &ExactQuantities) -> Self {
        ExactRow {
            id,
            combination: combination.to_string(),
            length_norm,
            entropy_rate: q.entropy_rate,
            mi_rate: q.mi_rate,
            epkl_rate: q.epkl_rate,
            rmi_rate: q.rmi_rate,
            expected_data_entropy_rate: q.expected_data_entropy_rate,
            entropy_chain_target: q.entropy_chain_target,
            mi_chain_target: q.mi_chain_target,
            epkl_chain_target: q.epkl_chain_target,
            rmi_chain_target: q.rmi_chain_target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub id: usize,
    pub combination: String,
    pub length_norm: bool,
    #[serde(rename = "S")]
    pub s: usize,
    pub estimator: String,
    pub estimate: f64,
    pub target: f64,
    pub abs_error: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub measure: String,
    pub ood_roc_auc: Option<f64>,
    pub seq_error_prr: f64,
}
