//! Experiment configuration: a single JSON document plus dotted-path overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use seq_uq::toy::{DatasetSpec, Domain, ToyModelSpec};
use seq_uq::{Combination, Vocab};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_spec: ToyModelSpec,
    pub m_members: usize,
    pub dataset_specs: Vec<DatasetSpec>,
    pub beam_width: usize,
    pub temperatures: Vec<f64>,
    pub sample_counts: Vec<usize>,
    pub combinations: Vec<Combination>,
    pub length_norm: Vec<bool>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Per-member draws for the exact-MC MI/EPKL columns; 0 leaves them empty.
    #[serde(default = "default_exact_mc_samples")]
    pub exact_mc_samples: usize,
    /// Beam widths crossed with `temperatures` by `sweep`; defaults to
    /// `{1, beam_width}`.
    #[serde(default)]
    pub sweep_beam_widths: Option<Vec<usize>>,
    /// Leading inputs of the first dataset used by `oracle`.
    #[serde(default = "default_oracle_inputs")]
    pub oracle_inputs: usize,
}

fn default_exact_mc_samples() -> usize {
    200
}

fn default_oracle_inputs() -> usize {
    3
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dataset = |n, domain, seed| DatasetSpec {
            n_inputs: n,
            input_len_range: (2, 5),
            domain_label: domain,
            seed,
        };
        ExperimentConfig {
            model_spec: ToyModelSpec {
                vocab: Vocab {
                    size_k: 5,
                    eos_id: seq_uq::EOS,
                    source_size_v: 16,
                },
                context_order_c: 2,
                max_len: 6,
                sharpness_tau: 1.5,
                disagreement_sigma_id: 0.3,
                disagreement_sigma_ood: 1.5,
                base_seed: 1,
            },
            m_members: 4,
            dataset_specs: vec![
                dataset(40, Domain::InDomain, 10),
                dataset(40, Domain::OutOfDomain, 11),
            ],
            beam_width: 4,
            temperatures: vec![1.0],
            sample_counts: vec![100, 1000],
            combinations: vec![Combination::PrEx, Combination::ExPr],
            length_norm: vec![true, false],
            output_dir: PathBuf::from("out"),
            seed: 0,
            exact_mc_samples: default_exact_mc_samples(),
            sweep_beam_widths: None,
            oracle_inputs: default_oracle_inputs(),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from the defaults), applies overrides, then
    /// validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(ExperimentConfig::default()).expect("default config serializes"),
        };
        for (key, raw) in overrides {
            apply_override(&mut doc, key, raw)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(format!("invalid config: {msg}")));
        self.model_spec
            .validate()
            .map_err(|e| CliError::Usage(format!("invalid config: model_spec: {e}")))?;
        if self.m_members == 0 {
            return bad("m_members must be at least 1");
        }
        if self.beam_width == 0 {
            return bad("beam_width must be at least 1");
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(*t > 0.0)) {
            return bad("temperatures must be a non-empty list of positive reals");
        }
        if self.combinations.is_empty() || self.length_norm.is_empty() {
            return bad("combinations and length_norm must be non-empty");
        }
        if self.sample_counts.contains(&0) {
            return bad("sample_counts must be positive");
        }
        if let Some(w) = &self.sweep_beam_widths {
            if w.is_empty() || w.contains(&0) {
                return bad("sweep_beam_widths must be a non-empty list of positive widths");
            }
        }
        for d in &self.dataset_specs {
            let (lo, hi) = d.input_len_range;
            if lo == 0 || lo > hi {
                return bad("input_len_range must satisfy 1 <= min <= max");
            }
        }
        Ok(())
    }

    /// `{1, beam_width}` without duplicates, ascending.
    pub fn score_beam_widths(&self) -> Vec<usize> {
        let mut w = vec![1, self.beam_width];
        w.dedup();
        w
    }

    pub fn sweep_widths(&self) -> Vec<usize> {
        self.sweep_beam_widths
            .clone()
            .unwrap_or_else(|| self.score_beam_widths())
    }
}

/// Sets the field at dotted `key` to `raw`, parsed as JSON when possible and
/// as a string otherwise. Numeric segments index into arrays.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.get_mut(*part)
                    .ok_or_else(|| CliError::Usage(format!("unknown config field `{key}`")))?
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Usage(format!("`{key}`: `{part}` is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Usage(format!("`{key}`: index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Usage(format!("`{key}` does not name a config field"))),
        };
    }
    Err(CliError::Usage("empty override key".into()))
}
