// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: strict TOML parsing (unknown keys are rejected) plus
//! construction of the configured model.

use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use qfr_core::models::{
    momentum_vs_markov_pair, qubit_counting, qubit_gaussian_feedback, GaussianFeedback, Model,
    RuleChoice,
};
use qfr_core::signal::{AxisSpec, SignalLattice};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("model setup failed: {0}")]
    Model(#[from] qfr_core::Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Deterministic,
    Trajectories,
    Compare,
    EmbedCheck,
    KernelCheck,
}

impl EngineKind {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "deterministic" => Ok(Self::Deterministic),
            "trajectories" => Ok(Self::Trajectories),
            "compare" => Ok(Self::Compare),
            "embed-check" => Ok(Self::EmbedCheck),
            "kernel-check" => Ok(Self::KernelCheck),
            other => Err(invalid(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(invalid(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: EngineKind,
    pub seed: Option<u64>,
    pub n_steps: Option<u64>,
    pub n_traj: Option<u64>,
    pub threads: Option<usize>,
    pub prune_threshold: Option<f64>,
    pub format: Option<OutputFormat>,
    pub out_dir: Option<PathBuf>,
    /// Dump the first N ensemble trajectories to `trajectories.csv`.
    pub dump_trajectories: Option<u64>,
    pub model: Option<ModelConfig>,
    pub lattice: Option<LatticeConfig>,
    pub compare: Option<CompareConfig>,
    pub embed_check: Option<EmbedCheckConfig>,
    pub kernel_check: Option<KernelCheckConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub lambda: Option<f64>,
    pub n_bins: Option<usize>,
    pub omega: Option<f64>,
    pub gain: Option<f64>,
    pub bin_lo: Option<f64>,
    pub bin_hi: Option<f64>,
    pub dt: Option<f64>,
    pub signal_step: Option<f64>,
    /// `markovian`, `momentum`, or `history`.
    pub rule: Option<String>,
    pub beta: Option<f64>,
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Per-component `[min, max, step]` triples.
    pub axes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// `exact` (path enumeration) or `monte-carlo`.
    pub mode: Option<String>,
    pub path_cap: Option<u64>,
    pub tv_threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedCheckConfig {
    pub memory: usize,
    pub n_steps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub gamma: f64,
    pub t_max: f64,
    pub dts: Vec<f64>,
    /// `constant` or `sin`.
    pub drive: Option<String>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("prune_threshold", self.prune_threshold),
            ("model.lambda", self.model.as_ref().and_then(|m| m.lambda)),
            ("model.omega", self.model.as_ref().and_then(|m| m.omega)),
            ("model.gain", self.model.as_ref().and_then(|m| m.gain)),
            ("model.bin_lo", self.model.as_ref().and_then(|m| m.bin_lo)),
            ("model.bin_hi", self.model.as_ref().and_then(|m| m.bin_hi)),
            ("model.dt", self.model.as_ref().and_then(|m| m.dt)),
            (
                "model.signal_step",
                self.model.as_ref().and_then(|m| m.signal_step),
            ),
            ("model.beta", self.model.as_ref().and_then(|m| m.beta)),
        ] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(invalid(format!("key `{name}` must be finite, got {v}")));
                }
            }
        }
        if let Some(p) = self.prune_threshold {
            if p < 0.0 {
                return Err(invalid(format!(
                    "key `prune_threshold` must be non-negative, got {p}"
                )));
            }
        }
        if let Some(lat) = &self.lattice {
            for axis in &lat.axes {
                if axis.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("key `lattice.axes` must contain finite values"));
                }
            }
        }
        if let Some(kc) = &self.kernel_check {
            if !kc.gamma.is_finite() || !kc.t_max.is_finite() {
                return Err(invalid("keys `kernel_check.gamma`/`t_max` must be finite"));
            }
            if kc.dts.is_empty() || kc.dts.iter().any(|d| !d.is_finite() || *d <= 0.0) {
                return Err(invalid(
                    "key `kernel_check.dts` must list positive finite steps",
                ));
            }
        }
        match self.engine {
            EngineKind::Trajectories => {
                if self.seed.is_none() {
                    return Err(invalid("key `seed` is required for trajectory runs"));
                }
                if self.model.is_none() {
                    return Err(invalid("section `[model]` is required for this engine"));
                }
            }
            EngineKind::Deterministic | EngineKind::Compare => {
                if self.model.is_none() {
                    return Err(invalid("section `[model]` is required for this engine"));
                }
                if self.engine == EngineKind::Compare
                    && self.compare_mode()? == CompareMode::MonteCarlo
                    && self.seed.is_none()
                {
                    return Err(invalid("key `seed` is required for monte-carlo compare"));
                }
            }
            EngineKind::EmbedCheck => {
                if self.embed_check.is_none() {
                    return Err(invalid(
                        "section `[embed_check]` is required for this engine",
                    ));
                }
            }
            EngineKind::KernelCheck => {
                if self.kernel_check.is_none() {
                    return Err(invalid(
                        "section `[kernel_check]` is required for this engine",
                    ));
                }
            }
        }
        if self.model.is_some() {
            // Surface bad model names and parameters as configuration errors.
            self.build_model().map(|_| ())?;
        }
        Ok(())
    }

    pub fn compare_mode(&self) -> Result<CompareMode, ConfigError> {
        match self
            .compare
            .as_ref()
            .and_then(|c| c.mode.as_deref())
            .unwrap_or("exact")
        {
            "exact" => Ok(CompareMode::Exact),
            "monte-carlo" => Ok(CompareMode::MonteCarlo),
            other => Err(invalid(format!("unknown compare mode `{other}`"))),
        }
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or(OutputFormat::Csv)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn prune(&self) -> f64 {
        self.prune_threshold.unwrap_or(1e-12)
    }

    pub fn n_traj(&self) -> u64 {
        self.n_traj.unwrap_or(10_000)
    }

    /// Builds the configured model, applying `n_steps` and lattice
    /// overrides.
    pub fn build_model(&self) -> Result<Model<f64>, ConfigError> {
        let mc = self
            .model
            .as_ref()
            .ok_or_else(|| invalid("section `[model]` is required for this engine"))?;
        let defaults = GaussianFeedback::<f64>::default();
        let n_steps = self.n_steps.unwrap_or(defaults.n_steps);

        let rule = match mc.rule.as_deref() {
            None | Some("markovian") => RuleChoice::Markovian,
            Some("momentum") => RuleChoice::Momentum {
                beta: mc
                    .beta
                    .ok_or_else(|| invalid("key `model.beta` is required for the momentum rule"))?,
            },
            Some("history") => RuleChoice::History {
                memory: mc.memory.ok_or_else(|| {
                    invalid("key `model.memory` is required for the history rule")
                })?,
            },
            Some(other) => return Err(invalid(format!("unknown rule `{other}`"))),
        };

        let mut model = match mc.name.as_str() {
            "qubit_counting" => {
                if !matches!(rule, RuleChoice::Markovian) {
                    return Err(invalid(
                        "model `qubit_counting` supports only the markovian rule; \
                         use `qubit_counting_momentum`",
                    ));
                }
                qubit_counting::<f64>(n_steps)?
            }
            "qubit_counting_momentum" => {
                let beta = mc.beta.ok_or_else(|| {
                    invalid("key `model.beta` is required for qubit_counting_momentum")
                })?;
                momentum_vs_markov_pair::<f64>(beta, n_steps)?.1
            }
            "qubit_gaussian_feedback" => qubit_gaussian_feedback(GaussianFeedback {
                lambda: mc.lambda.unwrap_or(defaults.lambda),
                n_bins: mc.n_bins.unwrap_or(defaults.n_bins),
                omega: mc.omega.unwrap_or(defaults.omega),
                bin_range: (
                    mc.bin_lo.unwrap_or(defaults.bin_range.0),
                    mc.bin_hi.unwrap_or(defaults.bin_range.1),
                ),
                gain: mc.gain.unwrap_or(defaults.gain),
                rule,
                dt: mc.dt.unwrap_or(defaults.dt),
                n_steps,
                signal_step: mc.signal_step.unwrap_or(defaults.signal_step),
            })?,
            other => {
                return Err(invalid(format!(
                    "unknown model `{other}`; available: qubit_counting, \
                     qubit_counting_momentum, qubit_gaussian_feedback"
                )))
            }
        };
        model.n_steps = n_steps;

        if let Some(lat) = &self.lattice {
            let axes: Vec<AxisSpec<f64>> = lat
                .axes
                .iter()
                .map(|&[min, max, step]| AxisSpec { min, max, step })
                .collect();
            if axes.len() != model.instrument.rule().dim() {
                return Err(invalid(format!(
                    "lattice override has {} axes but the rule needs {}",
                    axes.len(),
                    model.instrument.rule().dim()
                )));
            }
            model.lattice = SignalLattice::new(axes)?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    Exact,
    MonteCarlo,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_deterministic_config_parses() {
        let cfg: RunConfig = toml::from_str(
            r#"
            engine = "deterministic"
            n_steps = 3
            [model]
            name = "qubit_counting"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.name, "qubit_counting");
        assert_eq!(model.n_steps, 3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let err = toml::from_str::<RunConfig>(
            r#"
            engine = "deterministic"
            n_stepz = 3
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("n_stepz"), "{err}");
    }

    #[test]
    fn trajectories_require_a_seed() {
        let cfg: RunConfig = toml::from_str(
            r#"
            engine = "trajectories"
            [model]
            name = "qubit_counting"
            "#,
        )
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn lattice_override_must_match_rule_dimension() {
        let cfg: RunConfig = toml::from_str(
            r#"
            engine = "deterministic"
            [model]
            name = "qubit_counting"
            [lattice]
            axes = [[0.0, 4.0, 1.0], [0.0, 1.0, 0.1]]
            "#,
        )
        .unwrap();
        assert!(cfg.build_model().is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let cfg: RunConfig = toml::from_str(
            r#"
            engine = "deterministic"
            prune_threshold = inf
            [model]
            name = "qubit_counting"
            "#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
