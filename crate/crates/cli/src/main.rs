//! `gaf-hole-lab <subcommand> --config <file> [--seed N] [--out PATH]`
//!
//! Exit status: 0 on success, 1 on configuration or runtime errors, 2 when a
//! `certify` check fails (the artifact is still written).

mod config;
mod output;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use crate::config::ExperimentConfig;
use crate::run::Subcommand;

#[derive(Debug, Parser)]
#[command(name = "gaf-hole-lab", version, about = "Hole probability experiments for Gaussian entire functions")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; overrides the config `out`. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_ERROR: u8 = 1;
const EXIT_CERTIFICATE_FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: one or more checks failed", cli.subcommand.as_str());
            ExitCode::from(EXIT_CERTIFICATE_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Returns `false` when a certificate check failed.
fn execute(cli: &Cli) -> Result<bool> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let artifact = run::run(cli.subcommand, &config)?;
    match cli.out.as_ref().or(config.out.as_ref()) {
        Some(path) => std::fs::write(path, &artifact.bytes).with_context(|| format!("out: writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&artifact.bytes).context("writing stdout")?,
    }
    Ok(!artifact.failed)
}
