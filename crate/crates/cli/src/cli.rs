//! Command-line parsing. Config fields can be overridden with trailing
//! `--dotted.path=value` (or `--dotted.path value`) flags.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pipeline::{EvalTask, Runner};

#[derive(Debug, Parser)]
#[command(name = "seq-uq", version, about = "Ensemble uncertainty experiments on toy sequence models")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the ensemble description and datasets.
    Synth,
    /// Beam-decode every dataset, plus reference and per-member decodes.
    Decode,
    /// Compute sequence, heuristic and token measures.
    Score,
    /// Error detection and OOD detection metrics.
    Eval {
        /// Tasks to run; all applicable tasks when omitted.
        #[arg(long, value_enum)]
        task: Vec<EvalTask>,
    },
    /// Compare sampled estimators with exact enumeration.
    Oracle,
    /// Temperature and beam-width sensitivity.
    Sweep,
}

type Overrides = Vec<(String, String)>;

/// Splits `--a.b=v` / `--a.b v` overrides (flags whose name contains a dot)
/// from the arguments clap understands.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, value) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match value {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::Usage(format!("override --{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn execute(args: Args, overrides: &[(String, String)]) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(args.config.as_deref(), overrides)?;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let runner = Runner::new(cfg, args.jobs)?;
    match args.command {
        Command::Synth => runner.synth(),
        Command::Decode => runner.decode(),
        Command::Score => runner.score(),
        Command::Eval { mut task } => {
            if task.is_empty() {
                task = runner.default_eval_tasks();
            }
            task.sort();
            task.dedup();
            runner.eval(&task)
        }
        Command::Oracle => runner.oracle(),
        Command::Sweep => runner.sweep(),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run(args: impl IntoIterator<Item = String>) -> i32 {
    let (rest, overrides) = match split_overrides(args.into_iter().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let parsed = match Args::try_parse_from(rest) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(parsed, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
