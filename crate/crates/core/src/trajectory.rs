// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic conditional-state trajectories, Monte Carlo ensemble
//! estimation of the resolved state, and the exact path-enumeration oracle.
//!
//! Trajectories draw from counter-based ChaCha streams: the ensemble seeds
//! one generator per trajectory index from the base seed, so parallel and
//! serial runs agree bit for bit.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{
    born_probabilities, instrument_apply, DensityMatrix, Instrument, WeightedState,
};
use crate::resolved::ResolvedState;
use crate::scalar::{real, Real};
use crate::signal::{SignalLattice, SignalPoint};
use crate::tolerances::{probability_floor, Tolerances};

/// Uniform draw in `[0, 1)` from the top 53 bits of the stream.
fn uniform<T: Real, R: RngCore>(rng: &mut R) -> T {
    let bits = rng.next_u64() >> 11;
    real::<T>(bits as f64 / (1u64 << 53) as f64)
}

/// The per-trajectory generator: stream `index` of the base seed.
fn trajectory_rng(base_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// One record of a sampled trajectory: the outcome drawn at `step` and the
/// signal and normalized state right after it.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T: Real> {
    pub step: u64,
    pub outcome: usize,
    pub signal: SignalPoint<T>,
    pub state: DensityMatrix<T>,
}

/// A full sampled trajectory, reproducible from its seed.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub records: Vec<TrajectoryRecord<T>>,
    pub seed: u64,
}

/// Draws one measurement outcome and applies the matching instrument
/// branch. Returns the outcome index, the projected updated signal, the
/// normalized conditional state, and whether projection clipped.
pub fn sample_step<T: Real, R: RngCore>(
    rho: &DensityMatrix<T>,
    y: &SignalPoint<T>,
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    step: u64,
    tol: &Tolerances<T>,
    rng: &mut R,
) -> Result<(usize, SignalPoint<T>, DensityMatrix<T>, bool)> {
    let probs = born_probabilities(inst.kraus(), rho, tol)?;
    let total: T = probs.iter().copied().sum();
    let floor = probability_floor::<T>();
    if total < floor {
        return Err(Error::DegenerateProbabilities {
            floor: floor.to_f64().unwrap_or(f64::NAN),
        });
    }

    // Clamped-and-renormalized categorical draw; zero-probability outcomes
    // occupy zero width and cannot be selected.
    let u = uniform::<T, _>(rng) * total;
    let mut cumulative = T::zero();
    let mut outcome = None;
    for (x, &p) in probs.iter().enumerate() {
        if p <= T::zero() {
            continue;
        }
        cumulative += p;
        if u < cumulative {
            outcome = Some(x);
            break;
        }
    }
    let outcome = match outcome {
        Some(x) => x,
        // Rounding pushed u past the last bin; take the last positive one.
        None => probs
            .iter()
            .rposition(|&p| p > T::zero())
            .expect("total above floor implies a positive entry"),
    };

    let weighted = WeightedState::from(rho.clone());
    let out = instrument_apply(inst, lattice, step, outcome, y, &weighted)?;
    let rho_next = out
        .state
        .normalized(tol)
        .ok_or(Error::DegenerateProbabilities {
            floor: floor.to_f64().unwrap_or(f64::NAN),
        })?;
    Ok((outcome, out.point, rho_next, out.clipped))
}

/// Samples a full trajectory of `n_steps` rounds from stream 0 of `seed`.
pub fn run_trajectory<T: Real>(
    rho0: &DensityMatrix<T>,
    y0: &SignalPoint<T>,
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    n_steps: u64,
    seed: u64,
    tol: &Tolerances<T>,
) -> Result<Trajectory<T>> {
    run_trajectory_stream(rho0, y0, inst, lattice, n_steps, seed, 0, tol)
}

/// Samples the trajectory that [`ensemble_estimate`] with the same base
/// seed runs at `stream`; lets callers dump individual ensemble members.
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory_stream<T: Real>(
    rho0: &DensityMatrix<T>,
    y0: &SignalPoint<T>,
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    n_steps: u64,
    base_seed: u64,
    stream: u64,
    tol: &Tolerances<T>,
) -> Result<Trajectory<T>> {
    let mut rng = trajectory_rng(base_seed, stream);
    let (index0, _) = lattice.project(y0)?;
    let mut y = lattice.point(index0);
    let mut rho = rho0.clone();
    let mut records = Vec::with_capacity(n_steps as usize);
    for step in 1..=n_steps {
        let (outcome, y_next, rho_next, _) =
            sample_step(&rho, &y, inst, lattice, step, tol, &mut rng)?;
        y = y_next;
        rho = rho_next;
        records.push(TrajectoryRecord {
            step,
            outcome,
            signal: y.clone(),
            state: rho.clone(),
        });
    }
    Ok(Trajectory {
        records,
        seed: base_seed,
    })
}

/// Monte Carlo estimate of the resolved state after `n_steps` rounds.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate<T: Real> {
    /// Accumulated `ρ/n_traj` at each trajectory's final lattice index.
    pub resolved: ResolvedState<T>,
    pub n_traj: u64,
    /// Binomial standard error of each index's trace weight.
    pub std_err: BTreeMap<usize, T>,
    /// Number of trajectories that ended at each index.
    pub counts: BTreeMap<usize, u64>,
}

/// Averages `n_traj` independent trajectories. Each trajectory contributes
/// its normalized final state, weighted `1/n_traj`, at its final signal
/// index, so the total trace is exactly one up to rounding.
///
/// Trajectories run in parallel; the reduction visits them in index order,
/// so the estimate is bit-identical for any thread count.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_estimate<T: Real>(
    rho0: &DensityMatrix<T>,
    y0: &SignalPoint<T>,
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    n_traj: u64,
    n_steps: u64,
    base_seed: u64,
    tol: &Tolerances<T>,
) -> Result<EnsembleEstimate<T>> {
    if n_traj == 0 {
        return Err(Error::BadModelParameter {
            reason: "ensemble needs at least one trajectory".into(),
        });
    }
    let (index0, _) = lattice.project(y0)?;
    let y_init = lattice.point(index0);

    let finals: Vec<Result<(usize, DensityMatrix<T>, u64)>> = (0..n_traj)
        .into_par_iter()
        .map(|traj| {
            let mut rng = trajectory_rng(base_seed, traj);
            let mut y = y_init.clone();
            let mut index = index0;
            let mut rho = rho0.clone();
            let mut clips = 0u64;
            for step in 1..=n_steps {
                let (_, y_next, rho_next, clipped) =
                    sample_step(&rho, &y, inst, lattice, step, tol, &mut rng)?;
                y = y_next;
                rho = rho_next;
                if clipped {
                    clips += 1;
                }
                let (idx, _) = lattice.project(&y)?;
                index = idx;
            }
            Ok((index, rho, clips))
        })
        .collect();

    let weight = T::one() / T::from_u64(n_traj).expect("trajectory count fits scalar");
    let mut sums: BTreeMap<usize, CMatrix<T>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut clip_total = 0u64;
    for item in finals {
        let (index, rho, clips) = item?;
        clip_total += clips;
        *counts.entry(index).or_insert(0) += 1;
        match sums.entry(index) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(rho.into_matrix());
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                *slot.get_mut() += rho.matrix();
            }
        }
    }

    let entries: BTreeMap<usize, WeightedState<T>> = sums
        .into_iter()
        .map(|(idx, m)| {
            (
                idx,
                WeightedState::from_matrix_unchecked(m.scaled_re(weight)),
            )
        })
        .collect();
    let n = T::from_u64(n_traj).expect("trajectory count fits scalar");
    let std_err: BTreeMap<usize, T> = counts
        .iter()
        .map(|(&idx, &c)| {
            let p = T::from_u64(c).expect("count fits scalar") / n;
            (idx, (p * (T::one() - p) / n).sqrt())
        })
        .collect();

    Ok(EnsembleEstimate {
        resolved: ResolvedState::from_parts(
            lattice.clone(),
            entries,
            n_steps,
            T::zero(),
            clip_total,
        ),
        n_traj,
        std_err,
        counts,
    })
}

/// Default cap on the number of enumerated outcome sequences.
pub const DEFAULT_PATH_CAP: u128 = 1_000_000;

/// Exact resolved state after `n_steps` rounds by exhaustive summation over
/// all outcome sequences.
///
/// Branches propagate unnormalized (never dividing by the branch
/// probability and re-multiplying), so zero-probability branches cost
/// nothing and contribute nothing. Branch traces telescope to a total of
/// one. This is the ground truth the deterministic engine is checked
/// against.
pub fn enumerate_paths<T: Real>(
    rho0: &DensityMatrix<T>,
    y0: &SignalPoint<T>,
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    n_steps: u64,
    cap: u128,
) -> Result<ResolvedState<T>> {
    let branching = inst.n_outcomes() as u128;
    let mut paths: u128 = 1;
    for _ in 0..n_steps {
        paths = paths.saturating_mul(branching);
        if paths > cap {
            return Err(Error::PathCapExceeded { paths, cap });
        }
    }

    let (index0, clipped0) = lattice.project(y0)?;
    let mut entries: BTreeMap<usize, WeightedState<T>> = BTreeMap::new();
    let mut clip_count = if clipped0 { 1 } else { 0 };
    let root = WeightedState::from_matrix_unchecked(rho0.matrix().clone());
    descend(
        inst,
        lattice,
        1,
        n_steps,
        index0,
        &root,
        &mut entries,
        &mut clip_count,
    )?;
    Ok(ResolvedState::from_parts(
        lattice.clone(),
        entries,
        n_steps,
        T::zero(),
        clip_count,
    ))
}

#[allow(clippy::too_many_arguments)]
fn descend<T: Real>(
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    step: u64,
    n_steps: u64,
    index: usize,
    branch: &WeightedState<T>,
    entries: &mut BTreeMap<usize, WeightedState<T>>,
    clip_count: &mut u64,
) -> Result<()> {
    if step > n_steps {
        match entries.entry(index) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(branch.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let mut acc = slot.get().matrix().clone();
                acc += branch.matrix();
                *slot.get_mut() = WeightedState::from_matrix_unchecked(acc);
            }
        }
        return Ok(());
    }
    let y = lattice.point(index);
    for x in 0..inst.n_outcomes() {
        let out = instrument_apply(inst, lattice, step, x, &y, branch)?;
        if out.clipped {
            *clip_count += 1;
        }
        descend(
            inst,
            lattice,
            step + 1,
            n_steps,
            out.index,
            &out.state,
            entries,
            clip_count,
        )?;
    }
    Ok(())
}
