// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Library side of the `qfr` binary: config parsing, run modes, and file
//! output, kept importable so integration tests can reuse the readers.

pub mod commands;
pub mod config;
pub mod output;

use commands::{RunError, Verdict};
use config::{ConfigError, EngineKind, RunConfig};

/// Dispatches a validated configuration to its engine.
pub fn run(config: &RunConfig) -> Result<Verdict, RunError> {
    match config.engine {
        EngineKind::Deterministic => {
            let model = build_model(config)?;
            commands::simulate_deterministic(config, &model)
        }
        EngineKind::Trajectories => {
            let model = build_model(config)?;
            commands::simulate_trajectories(config, &model)
        }
        EngineKind::Compare => {
            let model = build_model(config)?;
            // The oracle enumerates on the model's own (default) lattice, so
            // a narrowed run lattice shows up as a genuine difference.
            let without_override = RunConfig {
                lattice: None,
                ..config.clone()
            };
            let reference = without_override
                .build_model()
                .map_err(config_as_run_error)?;
            let mode = config.compare_mode().map_err(config_as_run_error)?;
            commands::compare(config, &model, &reference.lattice, mode)
        }
        EngineKind::EmbedCheck => commands::embed_check(config),
        EngineKind::KernelCheck => commands::kernel_check(config),
    }
}

fn build_model(config: &RunConfig) -> Result<qfr_core::ModelF64, RunError> {
    config.build_model().map_err(config_as_run_error)
}

fn config_as_run_error(err: ConfigError) -> RunError {
    match err {
        ConfigError::Model(core) => RunError::Core(core),
        other => RunError::Core(qfr_core::Error::BadModelParameter {
            reason: other.to_string(),
        }),
    }
}
