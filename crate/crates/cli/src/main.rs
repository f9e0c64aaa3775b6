use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use graspset::pipeline::{
    cmd_annotate, cmd_bounds, cmd_build, cmd_eval, cmd_stats, with_workers, PipelineConfig,
};

/// Batch toolkit for multi-hand grasp datasets.
#[derive(Parser, Debug)]
#[command(name = "graspset", version)]
struct Cli {
    /// Pipeline config (TOML, or JSON by extension).
    #[arg(long, global = true, default_value = "graspset.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect contacts, filter penetrating grasps, summarize contacts.
    Annotate {
        /// Recompute every grasp instead of reusing earlier results.
        #[arg(long)]
        fresh: bool,
    },
    /// Compute per-hand bin bounds from the kept grasps.
    Bounds,
    /// Select grasps per contact pattern and write conversation samples.
    Build,
    /// Score predictions (pose records or token streams) against kept grasps.
    Eval {
        predictions: PathBuf,
        /// Decode token streams even when the bin spec hash differs.
        #[arg(long)]
        force: bool,
    },
    /// Report dataset size per hand.
    Stats,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut config =
        PipelineConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    config.validate()?;
    let workers = config.workers;
    with_workers(workers, || -> anyhow::Result<ExitCode> {
        match cli.command {
            Command::Annotate { fresh } => {
                let s = cmd_annotate(&config, fresh)?;
                println!(
                    "annotate: {} grasps, {} kept, {} dropped, {} failed ({} computed, {} reused)",
                    s.total, s.kept, s.dropped, s.failed, s.computed, s.reused
                );
                if s.failure_rate_exceeded() {
                    eprintln!("error: more than 10% of grasps failed; see annotate/failed.jsonl");
                    return Ok(ExitCode::from(2));
                }
            }
            Command::Bounds => {
                for b in cmd_bounds(&config)? {
                    println!("bounds: {} ({} grasps, {} bins, hash {})", b.hand, b.grasps, b.n_bins, &b.corpus_hash[..12]);
                }
            }
            Command::Build => {
                let s = cmd_build(&config)?;
                println!("build: {} grasps selected, {} samples", s.selected, s.samples);
                for (kind, n) in &s.per_kind {
                    println!("  {kind}: {n}");
                }
            }
            Command::Eval { predictions, force } => {
                let report = cmd_eval(&config, &predictions, force)?;
                print!("{}", report.to_table());
            }
            Command::Stats => {
                print!("{}", cmd_stats(&config)?.to_table());
            }
        }
        Ok(ExitCode::SUCCESS)
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
