//! Command line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad arguments (from clap),
//! 3 invalid configuration. Every output file is written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ConfigError, RunConfig};
use crate::dqn::checkpoint::Checkpoint;
use crate::engine::results::{render_results, sort_rows, ResultRow};
use crate::engine::runner::{
    evaluate, learner_seed, replication_seed, run_sweep, train, Learner, SweepAxis,
};
use crate::engine::EngineError;
use crate::oracle::{oracle_report, OracleError, TinyInstance};
use crate::policy::PolicyKind;
use crate::semantics::{Semantics, SemanticsError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("similarity model: {0}")]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Semantics(_) => 3,
            CliError::Usage(_) | CliError::Oracle(OracleError::Bounds(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aosi",
    version,
    about = "AoSI simulator and DQN scheduling harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// TOML run config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    Sources,
    Tau,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one policy and write checkpoint.bin and rewards.csv into --out.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint; writes a results CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every policy over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Restrict to these policies (repeatable); all by default.
        #[arg(long)]
        policy: Vec<PolicyKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive optimum and baseline gaps on a tiny sampled instance (JSON).
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        periods: usize,
        /// Overrides the config's source count (at most 2).
        #[arg(long, default_value_t = 2)]
        sources: usize,
        /// Overrides the config's largest symbols-per-word choice (at most 2).
        #[arg(long, default_value_t = 2)]
        max_symbols: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the similarity model as a CSV table usable as a config input.
    ExportSimilarity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        snr_db_min: f64,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        snr_db_max: f64,
        #[arg(long, default_value_t = 1.0)]
        snr_db_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(RunConfig, Arc<Semantics>), CliError> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sim.master_seed = seed;
    }
    cfg.validate()?;
    let sem = Arc::new(Semantics::from_config(&cfg.sim)?);
    Ok((cfg, sem))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            common,
            policy,
            replication,
            out,
        } => {
            let (cfg, sem) = load(&common)?;
            std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            let rep = replication_seed(
                cfg.sim.master_seed,
                cfg.sim.sources,
                cfg.sim.sampling_interval_s,
                replication,
            );
            let (learner, log) = train(policy, &cfg, sem, rep)?;
            let mut csv =
                String::from("episode,greedy_prob,mean_reward,long_term_avg_aosi,mean_loss\n");
            for e in &log {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    e.episode,
                    e.greedy_prob,
                    e.mean_reward,
                    e.long_term_avg_aosi,
                    opt(e.mean_loss)
                )
                .unwrap();
            }
            write_atomic(
                &out.join("checkpoint.bin"),
                &learner.checkpoint().to_bytes(),
            )?;
            write_atomic(&out.join("rewards.csv"), csv.as_bytes())?;
            write_atomic(&out.join("config.toml"), cfg.to_toml_string()?.as_bytes())?;
        }
        Command::Eval {
            common,
            checkpoint,
            replication,
            out,
        } => {
            let (cfg, sem) = load(&common)?;
            let ckpt = Checkpoint::load(&checkpoint).map_err(EngineError::from)?;
            let rep = replication_seed(
                cfg.sim.master_seed,
                cfg.sim.sources,
                cfg.sim.sampling_interval_s,
                replication,
            );
            let kind: PolicyKind = ckpt.policy.parse().map_err(EngineError::from)?;
            let mut learner =
                Learner::from_checkpoint(ckpt, &cfg.sim, &cfg.dqn, learner_seed(rep, kind))?;
            let eval = evaluate(&mut learner, &cfg, sem, rep)?;
            let fp = cfg.fingerprint();
            let mut rows: Vec<ResultRow> = eval
                .iter()
                .map(|e| ResultRow {
                    policy: kind.name().into(),
                    sources: cfg.sim.sources,
                    tau: cfg.sim.sampling_interval_s,
                    replication,
                    episode: Some(e.episode),
                    long_term_avg_aosi: e.long_term_avg_aosi,
                    mean_reward: e.mean_reward,
                    config_fingerprint: fp.clone(),
                })
                .collect();
            sort_rows(&mut rows);
            write_atomic(&out, render_results(&rows).as_bytes())?;
        }
        Command::Sweep {
            common,
            axis,
            reps,
            policy,
            out,
        } => {
            if reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let (cfg, sem) = load(&common)?;
            let policies = if policy.is_empty() {
                PolicyKind::ALL.to_vec()
            } else {
                policy
            };
            let axis = match axis {
                Axis::Sources => SweepAxis::Sources,
                Axis::Tau => SweepAxis::Tau,
            };
            let rows = run_sweep(&cfg, sem, axis, reps, &policies)?;
            write_atomic(&out, render_results(&rows).as_bytes())?;
        }
        Command::Oracle {
            common,
            periods,
            sources,
            max_symbols,
            out,
        } => {
            let (mut cfg, _) = load(&common)?;
            cfg.sim.sources = sources;
            cfg.sim.max_symbols_per_word = max_symbols;
            cfg.validate()?;
            let sem = Arc::new(Semantics::from_config(&cfg.sim)?);
            let inst = TinyInstance::sample(&cfg.sim, periods, cfg.sim.master_seed)?;
            let report = oracle_report(&inst, sem, cfg.sim.master_seed)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_atomic(&out, json.as_bytes())?;
        }
        Command::ExportSimilarity {
            common,
            snr_db_min,
            snr_db_max,
            snr_db_step,
            out,
        } => {
            if !(snr_db_step > 0.0 && snr_db_max > snr_db_min) {
                return Err(CliError::Usage(
                    "need snr-db-max > snr-db-min and a positive step".into(),
                ));
            }
            let (cfg, sem) = load(&common)?;
            let n = ((snr_db_max - snr_db_min) / snr_db_step).floor() as usize + 1;
            let grid: Vec<f64> = (0..n)
                .map(|i| snr_db_min + i as f64 * snr_db_step)
                .collect();
            let ks: Vec<u32> = (1..=cfg.sim.max_symbols_per_word).collect();
            let table = sem.model.tabulate(&ks, &grid)?;
            write_atomic(&out, table.to_csv().as_bytes())?;
        }
    }
    Ok(())
}
