//! Config-driven experiment runner over `incident-core`.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

pub use commands::Command;
pub use config::ExperimentConfig;
pub use manifest::{Run, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "incidur", version, about = "Traffic incident duration experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Loads the config, applies overrides, runs the command and writes the
/// manifest.
pub fn execute(cli: &Cli) -> Result<RunManifest> {
    let mut cfg = ExperimentConfig::from_path(&cli.config)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    let dir = cfg.output_dir.take().unwrap_or_else(|| PathBuf::from("out"));
    let hash = manifest::sha256_hex(&serde_json::to_vec(&cfg)?);
    let mut run = Run::new(&dir, cli.command.name(), hash, cfg.seed(), cli.workers)?;
    commands::run(cli.command, &cfg, &mut run)?;
    run.finish()
}
