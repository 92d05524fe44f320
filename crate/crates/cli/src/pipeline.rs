//! The experiment stages. Every stage reads its inputs from the output
//! directory, fans inputs out over a worker pool and writes results in input
//! order, so outputs do not depend on the number of workers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seq_uq::decode::{ancestral_sample, beam_search, Hypothesis};
use seq_uq::eval::{
    align, aupr, cross_bleu, cross_wer, rejection_prr, roc_auc, sentence_bleu, token_error_labels, wer,
    LabeledScores, VarianceVariant,
};
use seq_uq::math::McEstimate;
use seq_uq::oracle::{exact_all, ExactQuantities};
use seq_uq::seq::{
    epkl_exact_mc, epkl_exact_mc_terms, mi_exact_mc, mi_exact_mc_terms, score_sequence, EstimatorConfig,
    SeqEstimator, Weighted,
};
use seq_uq::token::{tok_entropy, tok_epkl, tok_mi, tok_npmi, tok_rmi, tok_score};
use seq_uq::toy::{generate_dataset, Domain, ToyModel, ToyModelSpec};
use seq_uq::{Combination, Ensemble, Token, TokenSeq};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{
    read_csv, read_json, read_jsonl, write_csv, write_json, write_jsonl, DatasetRow, HypothesisRow,
    MemberDecodeRow,
};
use crate::rows::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum EvalTask {
    SeqError,
    TokError,
    Ood,
}

/// The ensemble description written by `synth` and read by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub model_spec: ToyModelSpec,
    pub m_members: usize,
}

/// Derives an independent seed for `(component, a, b)` from the run seed.
pub fn sub_seed(seed: u64, component: &str, a: u64, b: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in component.bytes() {
        h = (h ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    for v in [a, b] {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ v;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Exact value each sampled estimator converges to.
pub fn estimator_target(est: SeqEstimator, q: &ExactQuantities) -> Option<f64> {
    match est {
        SeqEstimator::EntropyJoint => Some(q.entropy_rate),
        SeqEstimator::EntropyChain => Some(q.entropy_chain_target),
        SeqEstimator::MiChain => Some(q.mi_chain_target),
        SeqEstimator::EpklChain => Some(q.epkl_chain_target),
        SeqEstimator::RmiChain => Some(q.rmi_chain_target),
        SeqEstimator::RmiJoint => Some(q.rmi_rate),
        SeqEstimator::DataEntropyChain => None,
    }
}

fn combination_named(name: &str) -> Result<Combination, CliError> {
    Combination::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| CliError::Data(format!("unknown combination `{name}`")))
}

pub struct Runner {
    pub cfg: ExperimentConfig,
    out: PathBuf,
    pool: rayon::ThreadPool,
}

type Beams = Vec<Vec<Hypothesis>>;

impl Runner {
    /// `jobs = None` uses one worker per available core.
    pub fn new(cfg: ExperimentConfig, jobs: Option<usize>) -> Result<Self, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            if j == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Data(format!("cannot start worker pool: {e}")))?;
        Ok(Runner {
            out: cfg.output_dir.clone(),
            cfg,
            pool,
        })
    }

    fn par_map<T: Sync, R: Send>(
        &self,
        items: &[T],
        f: impl Fn(usize, &T) -> Result<R, CliError> + Sync + Send,
    ) -> Result<Vec<R>, CliError> {
        self.pool
            .install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
    }

    fn ensemble_path(&self) -> PathBuf {
        self.out.join("ensemble.json")
    }

    fn dataset_path(&self, i: usize) -> PathBuf {
        self.out.join("datasets").join(format!("dataset_{i}.jsonl"))
    }

    fn hyps_path(&self, i: usize, c: Combination, b: usize) -> PathBuf {
        self.out
            .join("decode")
            .join(format!("hyps_d{i}_{}_b{b}.jsonl", c.name()))
    }

    fn refs_path(&self, i: usize) -> PathBuf {
        self.out.join("decode").join(format!("refs_d{i}.jsonl"))
    }

    fn members_path(&self, i: usize) -> PathBuf {
        self.out.join("decode").join(format!("members_d{i}.jsonl"))
    }

    fn score_path(&self, kind: &str, i: usize) -> PathBuf {
        self.out.join("score").join(format!("{kind}_d{i}.csv"))
    }

    fn eval_path(&self, task: &str, i: usize) -> PathBuf {
        self.out.join("eval").join(format!("{task}_d{i}.csv"))
    }

    fn load_spec(&self) -> Result<EnsembleFile, CliError> {
        read_json(&self.ensemble_path(), "synth")
    }

    fn ensemble(&self, spec: &EnsembleFile, c: Combination) -> Result<Ensemble<ToyModel>, CliError> {
        Ok(Ensemble::toy(spec.model_spec, spec.m_members, c)?)
    }

    /// Greedy decodes of the held-out ensemble `[M, 2M)` act as references.
    fn reference_ensemble(&self, spec: &EnsembleFile) -> Result<Ensemble<ToyModel>, CliError> {
        let m = spec.m_members;
        Ok(Ensemble::toy_range(spec.model_spec, m..2 * m, Combination::PrEx)?)
    }

    fn load_dataset(&self, i: usize) -> Result<Vec<Vec<Token>>, CliError> {
        let path = self.dataset_path(i);
        let rows: Vec<DatasetRow> = read_jsonl(&path, "synth")?;
        rows.into_iter()
            .enumerate()
            .map(|(n, r)| {
                if r.id != n {
                    return Err(CliError::format(&path, format!("expected id {n}, found {}", r.id)));
                }
                Ok(r.src)
            })
            .collect()
    }

    fn load_beams(&self, i: usize, c: Combination, b: usize, n: usize) -> Result<Beams, CliError> {
        let path = self.hyps_path(i, c, b);
        let mut beams: Beams = vec![Vec::new(); n];
        for row in read_jsonl::<HypothesisRow>(&path, "decode")? {
            let id = row.id;
            let slot = beams
                .get_mut(id)
                .ok_or_else(|| CliError::format(&path, format!("id {id} outside the dataset")))?;
            slot.push(row.into_hypothesis(&path)?);
        }
        if let Some(id) = beams.iter().position(|b| b.is_empty()) {
            return Err(CliError::format(&path, format!("no hypotheses for id {id}")));
        }
        Ok(beams)
    }

    fn load_refs(&self, i: usize, n: usize) -> Result<Vec<TokenSeq>, CliError> {
        let path = self.refs_path(i);
        let refs: Vec<TokenSeq> = read_jsonl::<HypothesisRow>(&path, "decode")?
            .into_iter()
            .map(|r| r.into_hypothesis(&path).map(|h| h.y))
            .collect::<Result<_, _>>()?;
        if refs.len() != n {
            return Err(CliError::format(&path, format!("expected {n} references, found {}", refs.len())));
        }
        Ok(refs)
    }

    fn load_member_decodes(&self, i: usize, n: usize, m: usize) -> Result<Vec<Vec<TokenSeq>>, CliError> {
        let path = self.members_path(i);
        let mut out = vec![Vec::with_capacity(m); n];
        for row in read_jsonl::<MemberDecodeRow>(&path, "decode")? {
            let y = TokenSeq::terminated(row.tokens).map_err(|e| CliError::format(&path, e))?;
            out.get_mut(row.id)
                .ok_or_else(|| CliError::format(&path, format!("id {} outside the dataset", row.id)))?
                .push(y);
        }
        if out.iter().any(|d| d.len() != m) {
            return Err(CliError::format(&path, "every input needs one decode per member"));
        }
        Ok(out)
    }

    fn first_in_domain(&self) -> Option<usize> {
        self.cfg
            .dataset_specs
            .iter()
            .position(|d| d.domain_label == Domain::InDomain)
    }

    fn ood_datasets(&self) -> Vec<usize> {
        (0..self.cfg.dataset_specs.len())
            .filter(|&i| self.cfg.dataset_specs[i].domain_label == Domain::OutOfDomain)
            .collect()
    }

    /// Writes the ensemble description and one JSONL file per dataset.
    pub fn synth(&self) -> Result<(), CliError> {
        let file = EnsembleFile {
            model_spec: self.cfg.model_spec,
            m_members: self.cfg.m_members,
        };
        write_json(&self.ensemble_path(), &file)?;
        for (i, dspec) in self.cfg.dataset_specs.iter().enumerate() {
            let rows: Vec<DatasetRow> = generate_dataset(dspec, &self.cfg.model_spec.vocab)?
                .into_iter()
                .enumerate()
                .map(|(id, x)| DatasetRow {
                    id,
                    src: x.tokens,
                    domain: dspec.domain_label.into(),
                })
                .collect();
            write_jsonl(&self.dataset_path(i), &rows)?;
        }
        Ok(())
    }

    /// Beams for every (combination, width), reference decodes and
    /// per-member greedy decodes.
    pub fn decode(&self) -> Result<(), CliError> {
        let spec = self.load_spec()?;
        let reference = self.reference_ensemble(&spec)?;
        let singles: Vec<Ensemble<ToyModel>> = (0..spec.m_members)
            .map(|m| Ensemble::toy_range(spec.model_spec, m..m + 1, Combination::PrEx))
            .collect::<Result<_, _>>()?;
        for i in 0..self.cfg.dataset_specs.len() {
            let xs = self.load_dataset(i)?;
            for &c in &self.cfg.combinations {
                let ens = self.ensemble(&spec, c)?;
                for b in self.cfg.score_beam_widths() {
                    let beams = self.par_map(&xs, |_, x| Ok(beam_search(&ens, x, b, false)?))?;
                    let rows: Vec<HypothesisRow> = beams
                        .iter()
                        .enumerate()
                        .flat_map(|(id, beam)| beam.hypotheses.iter().map(move |h| HypothesisRow::new(id, h)))
                        .collect();
                    write_jsonl(&self.hyps_path(i, c, b), &rows)?;
                }
            }
            let refs = self.par_map(&xs, |id, x| {
                Ok(HypothesisRow::new(id, beam_search(&reference, x, 1, false)?.best()))
            })?;
            write_jsonl(&self.refs_path(i), &refs)?;
            let members = self.par_map(&xs, |id, x| {
                singles
                    .iter()
                    .enumerate()
                    .map(|(member, e)| {
                        Ok(MemberDecodeRow {
                            id,
                            member,
                            tokens: beam_search(e, x, 1, false)?.best().y.tokens.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            write_jsonl(&self.members_path(i), &members.concat())?;
        }
        Ok(())
    }

    /// Sequence measures, heuristic baselines and 1-best token measures.
    pub fn score(&self) -> Result<(), CliError> {
        let spec = self.load_spec()?;
        let widths = self.cfg.score_beam_widths();
        let ensembles: Vec<(Combination, Ensemble<ToyModel>)> = self
            .cfg
            .combinations
            .iter()
            .map(|&c| Ok((c, self.ensemble(&spec, c)?)))
            .collect::<Result<_, CliError>>()?;
        for i in 0..self.cfg.dataset_specs.len() {
            let xs = self.load_dataset(i)?;
            let n = xs.len();
            let mut beams: BTreeMap<(Combination, usize), Beams> = BTreeMap::new();
            for &c in &self.cfg.combinations {
                for &b in &widths {
                    beams.insert((c, b), self.load_beams(i, c, b, n)?);
                }
            }
            let decodes = self.load_member_decodes(i, n, spec.m_members)?;
            let per_input = self.par_map(&xs, |id, x| {
                self.score_input(i, id, x, &ensembles, &beams, &decodes[id])
            })?;
            let mut scores = Vec::new();
            let mut heuristics = Vec::new();
            let mut tokens = Vec::new();
            for (s, h, t) in per_input {
                scores.extend(s);
                heuristics.extend(h);
                tokens.extend(t);
            }
            write_csv(&self.score_path("scores", i), &scores)?;
            write_csv(&self.score_path("heuristics", i), &heuristics)?;
            write_csv(&self.score_path("tokens", i), &tokens)?;
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn score_input(
        &self,
        dataset: usize,
        id: usize,
        x: &[Token],
        ensembles: &[(Combination, Ensemble<ToyModel>)],
        beams: &BTreeMap<(Combination, usize), Beams>,
        decodes: &[TokenSeq],
    ) -> Result<(Vec<ScoreRow>, Vec<HeuristicRow>, Vec<TokenRow>), CliError> {
        let (cross_w, cross_b) = if decodes.len() >= 2 {
            (Some(cross_wer(decodes)?), Some(cross_bleu(decodes)?))
        } else {
            (None, None)
        };
        let mc_seed = sub_seed(self.cfg.seed, "exact_mc", dataset as u64, id as u64);
        let (mut scores, mut heuristics, mut tokens) = (Vec::new(), Vec::new(), Vec::new());
        for (c, ens) in ensembles {
            let (c, name) = (*c, c.name());
            let mut exact_mc = BTreeMap::new();
            for &ln in &self.cfg.length_norm {
                if self.cfg.exact_mc_samples > 0 {
                    let cfg = EstimatorConfig::new(1.0, ln, c)?;
                    let s = self.cfg.exact_mc_samples;
                    exact_mc.insert(
                        ln,
                        (mi_exact_mc(ens, x, s, mc_seed, &cfg)?, epkl_exact_mc(ens, x, s, mc_seed, &cfg)?),
                    );
                }
            }
            for b in self.cfg.score_beam_widths() {
                let hyps = &beams[&(c, b)][id];
                for &t in &self.cfg.temperatures {
                    let set = Weighted::importance(hyps, t, c)?;
                    for &ln in &self.cfg.length_norm {
                        let cfg = EstimatorConfig::new(t, ln, c)?;
                        let mut u = score_sequence(ens, x, &set, &cfg, None)?;
                        if let Some(&(mi, epkl)) = exact_mc.get(&ln) {
                            u.ku_mi_exact_mc = Some(mi);
                            u.ku_epkl_exact_mc = Some(epkl);
                        }
                        scores.push(ScoreRow::new(id, name, b, t, ln, &u));
                    }
                    heuristics.push(HeuristicRow {
                        id,
                        combination: name.to_string(),
                        b,
                        t,
                        var_p: set.heuristic_variance(VarianceVariant::Prob)?,
                        var_p_norm: set.heuristic_variance(VarianceVariant::ProbNorm)?,
                        var_lnp: set.heuristic_variance(VarianceVariant::LogProb)?,
                        var_lnp_norm: set.heuristic_variance(VarianceVariant::LogProbNorm)?,
                        cross_wer: cross_w,
                        cross_bleu: cross_b,
                    });
                }
            }
            let best = &beams[&(c, self.cfg.beam_width)][id][0];
            for (position, step) in ens.trace(x, &best.y)?.iter().enumerate() {
                tokens.push(TokenRow {
                    id,
                    combination: name.to_string(),
                    position,
                    token: best.y.tokens[position],
                    entropy: tok_entropy(step, c),
                    mi: tok_mi(step, c),
                    epkl: tok_epkl(step).value,
                    rmi: tok_rmi(step, c).value,
                    score: tok_score(step, c)?.value,
                    npmi: tok_npmi(step, c)?.value,
                });
            }
        }
        Ok((scores, heuristics, tokens))
    }

    pub fn eval(&self, tasks: &[EvalTask]) -> Result<(), CliError> {
        for task in tasks {
            match task {
                EvalTask::SeqError => self.eval_seq_error()?,
                EvalTask::TokError => self.eval_tok_error()?,
                EvalTask::Ood => self.eval_ood()?,
            }
        }
        Ok(())
    }

    /// Tasks run by `eval` when none is named: OOD detection only when both
    /// domains are configured.
    pub fn default_eval_tasks(&self) -> Vec<EvalTask> {
        let mut tasks = vec![EvalTask::SeqError, EvalTask::TokError];
        if self.first_in_domain().is_some() && !self.ood_datasets().is_empty() {
            tasks.push(EvalTask::Ood);
        }
        tasks
    }

    fn eval_seq_error(&self) -> Result<(), CliError> {
        for i in 0..self.cfg.dataset_specs.len() {
            let n = self.load_dataset(i)?.len();
            let refs = self.load_refs(i, n)?;
            let mut wer_err = BTreeMap::new();
            let mut bleu_err = BTreeMap::new();
            for &c in &self.cfg.combinations {
                for b in self.cfg.score_beam_widths() {
                    let beams = self.load_beams(i, c, b, n)?;
                    let best: Vec<&TokenSeq> = beams.iter().map(|beam| &beam[0].y).collect();
                    wer_err.insert(
                        (c.name().to_string(), b),
                        refs.iter().zip(&best).map(|(r, h)| wer(r, h)).collect::<Vec<f64>>(),
                    );
                    bleu_err.insert(
                        (c.name().to_string(), b),
                        refs.iter()
                            .zip(&best)
                            .map(|(r, h)| 100.0 - sentence_bleu(r, h, 4))
                            .collect::<Vec<f64>>(),
                    );
                }
            }
            let groups = self.grouped_measures(i, n)?;
            let mut rows = Vec::new();
            for (task, errors) in [("seq_error_wer", &wer_err), ("seq_error_bleu", &bleu_err)] {
                for (key, columns) in &groups {
                    let err = errors
                        .get(&(key.combination.clone(), key.b))
                        .ok_or_else(|| CliError::Data(format!("no decodes for {}, B={}", key.combination, key.b)))?;
                    for (measure, values) in columns {
                        rows.push(key.metric(task, measure, rejection_prr(values, err)?.prr));
                    }
                }
            }
            write_csv(&self.eval_path("seq_error", i), &rows)?;
        }
        Ok(())
    }

    fn eval_tok_error(&self) -> Result<(), CliError> {
        let b = self.cfg.beam_width;
        for i in 0..self.cfg.dataset_specs.len() {
            let n = self.load_dataset(i)?.len();
            let refs = self.load_refs(i, n)?;
            let tokens: Vec<TokenRow> = read_csv(&self.score_path("tokens", i), "score")?;
            let mut rows = Vec::new();
            for &c in &self.cfg.combinations {
                let beams = self.load_beams(i, c, b, n)?;
                let labels: Vec<Vec<u8>> = refs
                    .iter()
                    .zip(&beams)
                    .map(|(r, beam)| token_error_labels(&align(r, &beam[0].y)))
                    .collect();
                let mut scores = vec![Vec::new(); TOKEN_MEASURES.len()];
                let mut flags = Vec::new();
                for row in tokens.iter().filter(|r| r.combination == c.name()) {
                    let per_input = labels
                        .get(row.id)
                        .ok_or_else(|| CliError::Data(format!("token row for unknown id {}", row.id)))?;
                    if let Some(&l) = per_input.get(row.position) {
                        flags.push(l == 1);
                        for (k, v) in row.measures().into_iter().enumerate() {
                            scores[k].push(v);
                        }
                    }
                }
                for (measure, s) in TOKEN_MEASURES.iter().zip(scores) {
                    let data = LabeledScores::new(s, flags.clone()).map_err(|e| {
                        CliError::Data(format!("dataset {i}, {}: token error labels: {e}", c.name()))
                    })?;
                    let value = aupr(&data).map_err(|e| {
                        CliError::Data(format!("dataset {i}, {}: token error detection: {e}", c.name()))
                    })?;
                    rows.push(MetricRow {
                        task: "tok_error".into(),
                        measure: measure.to_string(),
                        combination: c.name().into(),
                        b,
                        t: None,
                        length_norm: None,
                        value,
                    });
                }
            }
            write_csv(&self.eval_path("tok_error", i), &rows)?;
        }
        Ok(())
    }

    fn eval_ood(&self) -> Result<(), CliError> {
        let id_set = self
            .first_in_domain()
            .ok_or_else(|| CliError::Data("ood evaluation needs an in-domain dataset".into()))?;
        let ood = self.ood_datasets();
        if ood.is_empty() {
            return Err(CliError::Data("ood evaluation needs an out-of-domain dataset".into()));
        }
        let n_id = self.load_dataset(id_set)?.len();
        let id_groups = self.grouped_measures(id_set, n_id)?;
        for j in ood {
            let n = self.load_dataset(j)?.len();
            let groups = self.grouped_measures(j, n)?;
            let mut rows = Vec::new();
            for (key, columns) in &id_groups {
                let other = groups
                    .get(key)
                    .ok_or_else(|| CliError::Data(format!("dataset {j} lacks scores for {key:?}")))?;
                for (measure, id_values) in columns {
                    let Some(ood_values) = other.get(measure) else { continue };
                    let mut s = id_values.clone();
                    s.extend(ood_values);
                    let labels = (0..s.len()).map(|k| k >= id_values.len()).collect();
                    let auc = roc_auc(&LabeledScores::new(s, labels)?)?;
                    rows.push(key.metric("ood", measure, auc));
                }
            }
            write_csv(&self.eval_path("ood", j), &rows)?;
        }
        Ok(())
    }

    /// Score and heuristic columns of dataset `i`, grouped by estimator
    /// setting and indexed by input id. Columns with missing cells are dropped.
    fn grouped_measures(&self, i: usize, n: usize) -> Result<BTreeMap<GroupKey, BTreeMap<String, Vec<f64>>>, CliError> {
        let scores: Vec<ScoreRow> = read_csv(&self.score_path("scores", i), "score")?;
        let heuristics: Vec<HeuristicRow> = read_csv(&self.score_path("heuristics", i), "score")?;
        let mut cells: BTreeMap<GroupKey, BTreeMap<String, Vec<Option<f64>>>> = BTreeMap::new();
        let mut put = |key: GroupKey, names: &[&str], values: &[Option<f64>], id: usize| -> Result<(), CliError> {
            if id >= n {
                return Err(CliError::Data(format!("dataset {i}: score row for unknown id {id}")));
            }
            let group = cells.entry(key).or_default();
            for (name, v) in names.iter().zip(values) {
                group.entry(name.to_string()).or_insert_with(|| vec![None; n])[id] = *v;
            }
            Ok(())
        };
        for r in &scores {
            combination_named(&r.combination)?;
            let key = GroupKey::new(&r.combination, r.b, Some(r.t), Some(r.length_norm));
            put(key, &SEQ_MEASURES, &r.measures(), r.id)?;
        }
        for r in &heuristics {
            let key = GroupKey::new(&r.combination, r.b, Some(r.t), None);
            put(key, &HEURISTIC_MEASURES, &r.measures(), r.id)?;
        }
        Ok(cells
            .into_iter()
            .map(|(k, cols)| {
                let complete = cols
                    .into_iter()
                    .filter_map(|(name, v)| v.into_iter().collect::<Option<Vec<f64>>>().map(|v| (name, v)))
                    .collect();
                (k, complete)
            })
            .collect())
    }

    /// Exact quantities and estimator errors against them for every sample count.
    pub fn oracle(&self) -> Result<(), CliError> {
        let spec = self.load_spec()?;
        let xs: Vec<Vec<Token>> = self
            .load_dataset(0)?
            .into_iter()
            .take(self.cfg.oracle_inputs)
            .collect();
        let mut jobs = Vec::new();
        for id in 0..xs.len() {
            for &c in &self.cfg.combinations {
                for &ln in &self.cfg.length_norm {
                    jobs.push((id, c, ln));
                }
            }
        }
        let results = self.par_map(&jobs, |_, &(id, c, ln)| {
            let ens = self.ensemble(&spec, c)?;
            let x = &xs[id];
            let cfg = EstimatorConfig::new(1.0, ln, c)?;
            let q = exact_all(&ens, x, &cfg)?;
            let mut conv = Vec::new();
            for &s in &self.cfg.sample_counts {
                let push = |conv: &mut Vec<ConvergenceRow>, name: &str, e: McEstimate, target: f64| {
                    conv.push(ConvergenceRow {
                        id,
                        combination: c.name().into(),
                        length_norm: ln,
                        s,
                        estimator: name.into(),
                        estimate: e.value,
                        target,
                        abs_error: (e.value - target).abs(),
                        std_err: e.std_err,
                    })
                };
                let samples = ancestral_sample(&ens, x, s, sub_seed(self.cfg.seed, "oracle", id as u64, s as u64))?;
                for est in SeqEstimator::ALL {
                    if let Some(target) = estimator_target(est, &q) {
                        push(&mut conv, est.name(), est.mc_estimate(&ens, x, &samples, &cfg)?, target);
                    }
                }
                let seed = sub_seed(self.cfg.seed, "oracle_exact_mc", id as u64, s as u64);
                let mi = McEstimate::from_terms(&mi_exact_mc_terms(&ens, x, s, seed, &cfg)?);
                push(&mut conv, "mi_exact_mc", mi, q.mi_rate);
                let epkl = McEstimate::from_terms(&epkl_exact_mc_terms(&ens, x, s, seed, &cfg)?);
                push(&mut conv, "epkl_exact_mc", epkl, q.epkl_rate);
            }
            Ok((ExactRow::new(id, c.name(), ln, &q), conv))
        })?;
        let (exact, conv): (Vec<ExactRow>, Vec<Vec<ConvergenceRow>>) = results.into_iter().unzip();
        write_csv(&self.out.join("oracle").join("exact.csv"), &exact)?;
        write_csv(&self.out.join("oracle").join("convergence.csv"), &conv.concat())
    }

    /// OOD ROC-AUC and sequence-error PRR for every (T, B) pair, using the
    /// first configured combination and length-normalization setting.
    pub fn sweep(&self) -> Result<(), CliError> {
        let spec = self.load_spec()?;
        let c = self.cfg.combinations[0];
        let ln = self.cfg.length_norm[0];
        let ens = self.ensemble(&spec, c)?;
        let reference = self.reference_ensemble(&spec)?;
        let id_set = self
            .first_in_domain()
            .ok_or_else(|| CliError::Data("sweep needs an in-domain dataset".into()))?;
        let id_xs = self.load_dataset(id_set)?;
        let refs = self.par_map(&id_xs, |_, x| Ok(beam_search(&reference, x, 1, false)?.best().y.clone()))?;
        let mut ood_xs = Vec::new();
        for j in self.ood_datasets() {
            ood_xs.extend(self.load_dataset(j)?);
        }

        let mut rows = Vec::new();
        let widths = self.cfg.sweep_widths();
        let mut per_width = Vec::new();
        for &b in &widths {
            let id_beams = self.par_map(&id_xs, |_, x| Ok(beam_search(&ens, x, b, false)?.hypotheses))?;
            let ood_beams = self.par_map(&ood_xs, |_, x| Ok(beam_search(&ens, x, b, false)?.hypotheses))?;
            let errors: Vec<f64> = refs.iter().zip(&id_beams).map(|(r, h)| wer(r, &h[0].y)).collect();
            per_width.push((b, id_beams, ood_beams, errors));
        }
        for &t in &self.cfg.temperatures {
            let cfg = EstimatorConfig::new(t, ln, c)?;
            for (b, id_beams, ood_beams, errors) in &per_width {
                let measure = |xs: &[Vec<Token>], beams: &Beams| {
                    let pairs: Vec<(&Vec<Token>, &Vec<Hypothesis>)> = xs.iter().zip(beams).collect();
                    self.par_map(&pairs, |_, (x, hyps)| {
                        let set = Weighted::importance(hyps, t, c)?;
                        Ok(seq_measure_values(&score_sequence(&ens, x, &set, &cfg, None)?))
                    })
                };
                let id_values = measure(&id_xs, id_beams)?;
                let ood_values = measure(&ood_xs, ood_beams)?;
                for (k, name) in SEQ_MEASURES.iter().enumerate() {
                    let Some(id_col) = id_values.iter().map(|v| v[k]).collect::<Option<Vec<f64>>>() else {
                        continue;
                    };
                    let ood_col: Vec<f64> = ood_values.iter().filter_map(|v| v[k]).collect();
                    let ood_roc_auc = if ood_col.is_empty() {
                        None
                    } else {
                        let mut s = id_col.clone();
                        s.extend(&ood_col);
                        let labels = (0..s.len()).map(|i| i >= id_col.len()).collect();
                        Some(roc_auc(&LabeledScores::new(s, labels)?)?)
                    };
                    rows.push(SweepRow {
                        t,
                        b: *b,
                        measure: name.to_string(),
                        ood_roc_auc,
                        seq_error_prr: rejection_prr(&id_col, errors)?.prr,
                    });
                }
            }
        }
        write_csv(&self.out.join("sweep").join("sweep.csv"), &rows)
    }
}

/// Estimator setting shared by all rows of a metric group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    combination: String,
    b: usize,
    /// Bit pattern of the positive temperature; orders like the value.
    t_bits: Option<u64>,
    length_norm: Option<bool>,
}

impl GroupKey {
    fn new(combination: &str, b: usize, t: Option<f64>, length_norm: Option<bool>) -> Self {
        GroupKey {
            combination: combination.to_string(),
            b,
            t_bits: t.map(f64::to_bits),
            length_norm,
        }
    }

    fn metric(&self, task: &str, measure: &str, value: f64) -> MetricRow {
        MetricRow {
            task: task.into(),
            measure: measure.into(),
            combination: self.combination.clone(),
            b: self.b,
            t: self.t_bits.map(f64::from_bits),
            length_norm: self.length_norm,
            value,
        }
    }
}
