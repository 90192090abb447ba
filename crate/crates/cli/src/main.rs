// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! `qfr` — config-driven feedback simulation runs.
//!
//! Usage: `qfr <config.toml> [--engine E] [--seed N] [--out DIR]
//! [--format csv|json] [--threads N]`; flags override the config file.
//!
//! Exit codes are a stable contract: 0 success, 1 numerical-threshold or
//! runtime failure, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qfr_cli::commands::Verdict;
use qfr_cli::config::{ConfigError, EngineKind, OutputFormat, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "qfr",
    about = "Discrete-time quantum feedback simulator",
    version
)]
struct Cli {
    /// Path to the TOML run configuration.
    config: PathBuf,

    /// Override the configured engine
    /// (deterministic | trajectories | compare | embed-check | kernel-check).
    #[arg(long)]
    engine: Option<String>,

    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the configured output format (csv | json).
    #[arg(long)]
    format: Option<String>,

    /// Worker threads for engine-level parallelism (0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(engine) = &cli.engine {
        config.engine = EngineKind::parse(engine)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(format) = &cli.format {
        config.format = Some(OutputFormat::parse(format)?);
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };

    if let Some(threads) = config.threads {
        if threads > 0 {
            // Errors only if a pool already exists, which cannot happen in
            // this single-shot binary.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }

    match qfr_cli::run(&config) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::ThresholdFailure) => {
            eprintln!("run finished but a numerical threshold failed; see the report");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("run failed: {err}");
            ExitCode::from(1)
        }
    }
}
