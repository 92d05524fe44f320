//! On-disk formats: JSON documents, JSONL records and CSV tables.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use seq_uq::decode::Hypothesis;
use seq_uq::toy::Domain;
use seq_uq::{Token, TokenSeq};

use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn open(path: &Path, stage: &'static str) -> Result<BufReader<File>, CliError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::MissingInput {
            path: path.to_path_buf(),
            stage,
        }),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::format(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T, CliError> {
    serde_json::from_reader(open(path, stage)?).map_err(|e| CliError::format(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| CliError::format(path, e))?;
        writeln!(w).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>, CliError> {
    let mut rows = Vec::new();
    for (n, line) in open(path, stage)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).map_err(|e| CliError::format(path, format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>, CliError> {
    csv::Reader::from_reader(open(path, stage)?)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::format(path, e))
}

/// Domain tag as written in dataset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Id,
    Ood,
}

impl From<Domain> for DomainTag {
    fn from(d: Domain) -> Self {
        match d {
            Domain::InDomain => DomainTag::Id,
            Domain::OutOfDomain => DomainTag::Ood,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub id: usize,
    pub src: Vec<Token>,
    pub domain: DomainTag,
}

/// One hypothesis; `-inf` log-probabilities are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub id: usize,
    pub rank: usize,
    pub tokens: Vec<Token>,
    pub log_post: Option<f64>,
    pub per_model: Vec<Vec<Option<f64>>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl HypothesisRow {
    pub fn new(id: usize, h: &Hypothesis) -> Self {
        HypothesisRow {
            id,
            rank: h.rank,
            tokens: h.y.tokens.clone(),
            log_post: finite(h.log_post),
            per_model: h
                .per_model
                .iter()
                .map(|row| row.iter().map(|&v| finite(v)).collect())
                .collect(),
        }
    }

    pub fn into_hypothesis(self, path: &Path) -> Result<Hypothesis, CliError> {
        let y = TokenSeq::terminated(self.tokens).map_err(|e| CliError::format(path, e))?;
        Ok(Hypothesis {
            y,
            log_post: self.log_post.unwrap_or(f64::NEG_INFINITY),
            per_model: self
                .per_model
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect())
                .collect(),
            rank: self.rank,
        })
    }
}

/// A single member's greedy decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDecodeRow {
    pub id: usize,
    pub member: usize,
    pub tokens: Vec<Token>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypothesis_rows_keep_infinities() {
        let h = Hypothesis {
            y: TokenSeq::terminated(vec![2, 0]).unwrap(),
            log_post: -1.5,
            per_model: vec![vec![-0.5, f64::NEG_INFINITY], vec![-0.25, -0.75]],
            rank: 3,
        };
        let line = serde_json::to_string(&HypothesisRow::new(7, &h)).unwrap();
        assert!(line.contains("null"));
        let back: HypothesisRow = serde_json::from_str(&line).unwrap();
        assert_eq!(back.id, 7);
        assert_eq!(back.into_hypothesis(Path::new("x")).unwrap(), h);
    }

    #[test]
    fn dataset_rows_use_short_domain_tags() {
        let row = DatasetRow {
            id: 0,
            src: vec![1, 2],
            domain: Domain::OutOfDomain.into(),
        };
        assert_eq!(
            serde_json::to_string(&row).unwrap(),
            r#"{"id":0,"src":[1,2],"domain":"ood"}"#
        );
    }

    #[test]
    fn missing_files_name_the_stage() {
        let err = read_jsonl::<DatasetRow>(Path::new("/nonexistent/d.jsonl"), "synth").unwrap_err();
        assert!(err.to_string().contains("synth"));
        assert_eq!(err.exit_code(), 2);
    }
}
