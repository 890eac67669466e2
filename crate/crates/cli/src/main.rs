//! `msf`: synthesize data, train, evaluate and self-check.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use msf_core::SemanticMode;

use config::{Mode, RunConfig};

#[derive(Parser)]
#[command(name = "msf", version, about = "Multi-semantic generative zero-shot classification on precomputed features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Split manifest; overrides `data.split`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    semantic_mode: Option<SemanticMode>,
    #[arg(long)]
    gate_threshold: Option<f64>,
}

fn parse_mode(s: &str) -> Result<SemanticMode, String> {
    s.parse::<SemanticMode>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark into `data.dir`.
    Synth(Common),
    /// Train all components and write a checkpoint and loss trace.
    Train(Common),
    /// Evaluate a checkpoint on the test features.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Defaults to `model.ckpt` in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Finite-difference, KL and table checks.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute H for the published result fixtures.
    RecomputeTables,
}

fn load(common: &Common, synth: bool) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        if synth {
            cfg.synthetic.generator.seed = seed;
        } else {
            cfg.experiment.seed = seed;
        }
    }
    if let Some(m) = common.semantic_mode {
        cfg.experiment.semantic_mode = m;
    }
    if let Some(t) = common.gate_threshold {
        cfg.experiment.gate.threshold = t;
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MSF_THREADS") {
        let n: usize = v.parse().with_context(|| format!("MSF_THREADS={v} is not a number"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    match cli.command {
        Command::Synth(c) => commands::synth(&load(&c, true)?, c.split.as_deref()).map(|_| true),
        Command::Train(c) => commands::train(&load(&c, false)?, c.split.as_deref()).map(|_| true),
        Command::Eval { common, mode, checkpoint } => {
            let cfg = load(&common, false)?;
            let mode = mode.unwrap_or(cfg.eval.mode);
            commands::eval(&cfg, common.split.as_deref(), checkpoint.as_deref(), common.gate_threshold, mode)
                .map(|_| true)
        }
        Command::Selfcheck { seed } => commands::selfcheck(seed),
        Command::RecomputeTables => Ok(commands::recompute_tables()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
