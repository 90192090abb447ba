// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! The five run modes: deterministic propagation, trajectory ensembles,
//! engine-vs-oracle comparison, embedding check, and kernel-limit check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use qfr_core::det::{det_step, StepSettings};
use qfr_core::models::Model;
use qfr_core::quantum::WeightedState;
use qfr_core::random::{rng_from_seed, uniform_signed};
use qfr_core::resolved::{init_resolved, max_entrywise_diff, total_variation, ResolvedState};
use qfr_core::signal::{
    kernel_limit_check, markovian_embed_history, MomentumParams, NonMarkovianRule, SignalLattice,
    SignalPoint,
};
use qfr_core::trajectory::{ensemble_estimate, enumerate_paths, run_trajectory_stream};
use qfr_core::Tolerances;

use crate::config::{CompareMode, OutputFormat, RunConfig};
use crate::output::{
    fmt17, snapshot_records, write_snapshots_csv, write_snapshots_json, write_trajectories_csv,
    JsonObject, SnapshotMeta, SnapshotRecord,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Core(#[from] qfr_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether the run's numerical pass criteria held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    ThresholdFailure,
}

fn tol() -> Tolerances<f64> {
    Tolerances::default()
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn write_snapshots(
    config: &RunConfig,
    dir: &Path,
    meta: &SnapshotMeta,
    records: &[SnapshotRecord],
) -> Result<PathBuf, RunError> {
    let path = match config.format() {
        OutputFormat::Csv => {
            let p = out_path(dir, "snapshots.csv");
            write_snapshots_csv(&p, meta, records)?;
            p
        }
        OutputFormat::Json => {
            let p = out_path(dir, "snapshots.json");
            write_snapshots_json(&p, meta, records)?;
            p
        }
    };
    Ok(path)
}

pub fn simulate_deterministic(config: &RunConfig, model: &Model<f64>) -> Result<Verdict, RunError> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let settings = StepSettings {
        prune_threshold: config.prune(),
        ..StepSettings::default()
    };

    let mut state = init_resolved(&model.rho0, &model.y0, model.lattice.clone())?;
    let mut records = snapshot_records(&state);
    for _ in 0..model.n_steps {
        state = det_step(&state, &model.instrument, &settings)?;
        records.extend(snapshot_records(&state));
    }

    let meta = SnapshotMeta::for_state("deterministic", &state, model.dim());
    write_snapshots(config, &dir, &meta, &records)?;

    JsonObject::new()
        .str("schema", "qfr.summary.v1")
        .str("engine", "deterministic")
        .str("model", &model.name)
        .int("n_steps", model.n_steps as i128)
        .float("final_trace_sum", state.total_trace())
        .float("leaked_mass", state.leaked_mass())
        .int("clip_count", state.clip_count() as i128)
        .int("support_size", state.support_size() as i128)
        .float("prune_threshold", settings.prune_threshold)
        .write(&out_path(&dir, "summary.json"))?;
    Ok(Verdict::Pass)
}

pub fn simulate_trajectories(config: &RunConfig, model: &Model<f64>) -> Result<Verdict, RunError> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let seed = config.seed.expect("validated: trajectories carry a seed");
    let n_traj = config.n_traj();

    let est = ensemble_estimate(
        &model.rho0,
        &model.y0,
        &model.instrument,
        &model.lattice,
        n_traj,
        model.n_steps,
        seed,
        &tol(),
    )?;

    let mut records = snapshot_records(&est.resolved);
    for record in &mut records {
        record.std_err = est.std_err.get(&record.index).copied();
    }
    let mut meta = SnapshotMeta::for_state("ensemble", &est.resolved, model.dim());
    meta.n_traj = Some(n_traj);
    write_snapshots(config, &dir, &meta, &records)?;

    if let Some(k) = config.dump_trajectories {
        let dumps: Vec<_> = (0..k.min(n_traj))
            .map(|stream| {
                run_trajectory_stream(
                    &model.rho0,
                    &model.y0,
                    &model.instrument,
                    &model.lattice,
                    model.n_steps,
                    seed,
                    stream,
                    &tol(),
                )
            })
            .collect::<Result<_, _>>()?;
        write_trajectories_csv(&out_path(&dir, "trajectories.csv"), &dumps)?;
    }

    JsonObject::new()
        .str("schema", "qfr.summary.v1")
        .str("engine", "trajectories")
        .str("model", &model.name)
        .int("n_steps", model.n_steps as i128)
        .int("n_traj", n_traj as i128)
        .int("seed", seed as i128)
        .float("final_trace_sum", est.resolved.total_trace())
        .int("clip_count", est.resolved.clip_count() as i128)
        .int("support_size", est.resolved.support_size() as i128)
        .write(&out_path(&dir, "summary.json"))?;
    Ok(Verdict::Pass)
}

/// Rebins a resolved state onto another lattice by projecting each entry's
/// physical signal point. With identical lattices this is the identity.
fn rebin(
    state: &ResolvedState<f64>,
    target: &SignalLattice<f64>,
) -> Result<ResolvedState<f64>, RunError> {
    let mut entries: BTreeMap<usize, WeightedState<f64>> = BTreeMap::new();
    let mut clips = 0u64;
    for (idx, w) in state.entries() {
        let point = state.lattice().point(idx);
        let (target_idx, clipped) = target.project(&point)?;
        if clipped {
            clips += 1;
        }
        match entries.entry(target_idx) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(w.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let mut acc = slot.get().matrix().clone();
                acc += w.matrix();
                *slot.get_mut() = WeightedState::new(acc, &tol()).map_err(RunError::Core)?;
            }
        }
    }
    Ok(ResolvedState::from_parts(
        target.clone(),
        entries,
        state.step(),
        state.leaked_mass(),
        state.clip_count() + clips,
    ))
}

const EXACT_COMPARE_THRESHOLD: f64 = 1e-10;
const MC_SIGMA_THRESHOLD: f64 = 4.0;

/// Deterministic engine against ground truth.
///
/// Exact mode enumerates every outcome sequence on the model's own lattice
/// (pruning disabled) and reports the max entrywise difference; the run
/// lattice may be overridden, in which case the deterministic result is
/// rebinned onto the oracle lattice and clipping shows up as a real
/// difference. Monte Carlo mode compares the ensemble estimate against the
/// deterministic distribution via total variation and per-bin sigma
/// deviations.
pub fn compare(
    config: &RunConfig,
    model: &Model<f64>,
    oracle_lattice: &SignalLattice<f64>,
    mode: CompareMode,
) -> Result<Verdict, RunError> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;

    let settings = match mode {
        CompareMode::Exact => StepSettings::exact(),
        CompareMode::MonteCarlo => StepSettings {
            prune_threshold: config.prune(),
            ..StepSettings::default()
        },
    };
    let mut det = init_resolved(&model.rho0, &model.y0, model.lattice.clone())?;
    for _ in 0..model.n_steps {
        det = det_step(&det, &model.instrument, &settings)?;
    }

    let report_path = out_path(&dir, "compare_report.json");
    match mode {
        CompareMode::Exact => {
            let cap = config
                .compare
                .as_ref()
                .and_then(|c| c.path_cap)
                .unwrap_or(qfr_core::trajectory::DEFAULT_PATH_CAP as u64)
                as u128;
            let oracle = enumerate_paths(
                &model.rho0,
                &model.y0,
                &model.instrument,
                oracle_lattice,
                model.n_steps,
                cap,
            )?;
            let det_binned = rebin(&det, oracle_lattice)?;
            let diff = max_entrywise_diff(&det_binned, &oracle);
            let tv = total_variation(&det_binned, &oracle);
            let pass = diff <= EXACT_COMPARE_THRESHOLD;
            JsonObject::new()
                .str("schema", "qfr.compare.v1")
                .str("mode", "exact")
                .str("model", &model.name)
                .int("n_steps", model.n_steps as i128)
                .float("max_entrywise_diff", diff)
                .float("threshold", EXACT_COMPARE_THRESHOLD)
                .float("total_variation", tv)
                .int("clip_count_det", det.clip_count() as i128)
                .int("clip_count_oracle", oracle.clip_count() as i128)
                .int("support_det", det.support_size() as i128)
                .int("support_oracle", oracle.support_size() as i128)
                .float("leaked_mass_det", det.leaked_mass())
                .bool("pass", pass)
                .write(&report_path)?;
            Ok(if pass {
                Verdict::Pass
            } else {
                Verdict::ThresholdFailure
            })
        }
        CompareMode::MonteCarlo => {
            let seed = config
                .seed
                .expect("validated: monte-carlo compare carries a seed");
            let n_traj = config.n_traj();
            let est = ensemble_estimate(
                &model.rho0,
                &model.y0,
                &model.instrument,
                &model.lattice,
                n_traj,
                model.n_steps,
                seed,
                &tol(),
            )?;
            let tv = total_variation(&est.resolved, &det);
            let det_dist = det.signal_distribution();
            let est_dist = est.resolved.signal_distribution();
            let indices: std::collections::BTreeSet<usize> =
                det_dist.keys().chain(est_dist.keys()).copied().collect();
            let n = n_traj as f64;
            let mut max_sigma_dev = 0.0f64;
            for idx in indices {
                let p = det_dist.get(&idx).copied().unwrap_or(0.0);
                let w = est_dist.get(&idx).copied().unwrap_or(0.0);
                let sigma = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
                max_sigma_dev = max_sigma_dev.max((w - p).abs() / sigma);
            }
            let tv_threshold = config
                .compare
                .as_ref()
                .and_then(|c| c.tv_threshold)
                .unwrap_or(0.01);
            let pass = tv <= tv_threshold && max_sigma_dev <= MC_SIGMA_THRESHOLD;
            JsonObject::new()
                .str("schema", "qfr.compare.v1")
                .str("mode", "monte-carlo")
                .str("model", &model.name)
                .int("n_steps", model.n_steps as i128)
                .int("n_traj", n_traj as i128)
                .int("seed", seed as i128)
                .float("total_variation", tv)
                .float("tv_threshold", tv_threshold)
                .float("max_sigma_deviation", max_sigma_dev)
                .float("sigma_threshold", MC_SIGMA_THRESHOLD)
                .int("clip_count_det", det.clip_count() as i128)
                .bool("pass", pass)
                .write(&report_path)?;
            Ok(if pass {
                Verdict::Pass
            } else {
                Verdict::ThresholdFailure
            })
        }
    }
}

const EMBED_THRESHOLD: f64 = 1e-12;

/// Runs a randomized contractive linear rule with `memory` past steps both
/// through the history embedding and through a plain ring buffer, and
/// reports the worst divergence of the signal component.
pub fn embed_check(config: &RunConfig) -> Result<Verdict, RunError> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let cfg = config.embed_check.as_ref().expect("validated");
    let memory = cfg.memory;

    let mut rng = rng_from_seed(cfg.seed);
    let mut coeffs: Vec<f64> = (0..=memory).map(|_| uniform_signed(&mut rng)).collect();
    let norm: f64 = coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1e-3);
    for c in &mut coeffs {
        *c *= 0.8 / norm;
    }
    let drive = 0.4 * uniform_signed::<f64, _>(&mut rng);

    let rule_coeffs = coeffs.clone();
    let rule = NonMarkovianRule::new(memory, move |_, x, history: &[f64]| {
        let mut acc = drive * x as f64;
        for (c, v) in rule_coeffs.iter().zip(history.iter()) {
            acc += c * v;
        }
        acc
    });
    let embedded = markovian_embed_history(&rule);

    let mut y = SignalPoint::new(vec![0.0; memory + 1]);
    let mut buffer = vec![0.0f64; memory + 1];
    let mut outcome_rng = rng_from_seed(cfg.seed ^ 0x5eed);
    let mut max_diff = 0.0f64;
    for n in 1..=cfg.n_steps {
        let x = (uniform_signed::<f64, _>(&mut outcome_rng) > 0.0) as usize;
        y = embedded.eval(n, x, &y);
        let mut acc = drive * x as f64;
        for (c, v) in coeffs.iter().zip(buffer.iter()) {
            acc += c * v;
        }
        buffer.rotate_right(1);
        buffer[0] = acc;
        max_diff = max_diff.max((y.component(0) - acc).abs());
    }

    let pass = max_diff <= EMBED_THRESHOLD;
    JsonObject::new()
        .str("schema", "qfr.embed_check.v1")
        .int("memory", memory as i128)
        .int("n_steps", cfg.n_steps as i128)
        .int("seed", cfg.seed as i128)
        .float("max_abs_diff", max_diff)
        .float("threshold", EMBED_THRESHOLD)
        .bool("pass", pass)
        .write(&out_path(&dir, "embed_report.json"))?;
    Ok(if pass {
        Verdict::Pass
    } else {
        Verdict::ThresholdFailure
    })
}

const KERNEL_RATIO_BAND: (f64, f64) = (1.6, 2.4);

/// Error table of the momentum recursion against its memory-kernel limit
/// over a ladder of halved time steps, with a convergence-order estimate.
pub fn kernel_check(config: &RunConfig) -> Result<Verdict, RunError> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let cfg = config.kernel_check.as_ref().expect("validated");
    let drive_name = cfg.drive.as_deref().unwrap_or("constant");
    let drive: Box<dyn Fn(f64) -> f64> = match drive_name {
        "constant" => Box::new(|_| 1.0),
        "sin" => Box::new(f64::sin),
        other => {
            return Err(RunError::Core(qfr_core::Error::BadModelParameter {
                reason: format!("unknown drive `{other}`; use constant or sin"),
            }))
        }
    };

    let mut errors = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let params = MomentumParams::continuum(cfg.gamma, dt).map_err(RunError::Core)?;
        errors.push(kernel_limit_check(params, &drive, cfg.t_max)?);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let order = if ratios.is_empty() {
        0.0
    } else {
        ratios.iter().map(|r| r.log2()).sum::<f64>() / ratios.len() as f64
    };
    let pass = ratios
        .iter()
        .all(|&r| (KERNEL_RATIO_BAND.0..=KERNEL_RATIO_BAND.1).contains(&r));

    let rows: Vec<String> = cfg
        .dts
        .iter()
        .zip(errors.iter())
        .map(|(dt, err)| format!("{{\"dt\": {}, \"error\": {}}}", fmt17(*dt), fmt17(*err)))
        .collect();
    JsonObject::new()
        .str("schema", "qfr.kernel_check.v1")
        .float("gamma", cfg.gamma)
        .float("t_max", cfg.t_max)
        .str("drive", drive_name)
        .raw("rows", format!("[{}]", rows.join(", ")))
        .float_array("ratios", &ratios)
        .float("order_estimate", order)
        .float_array("ratio_band", &[KERNEL_RATIO_BAND.0, KERNEL_RATIO_BAND.1])
        .bool("pass", pass)
        .write(&out_path(&dir, "kernel_report.json"))?;
    Ok(if pass {
        Verdict::Pass
    } else {
        Verdict::ThresholdFailure
    })
}
