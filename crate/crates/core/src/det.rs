// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic propagation of the resolved state over the sparse support.
//!
//! One step fans every occupied lattice point out over all measurement
//! outcomes, routes each branch to the projection of its updated signal,
//! and accumulates. The fan-out runs in parallel over source entries, but
//! contributions are merged in a fixed order (ascending source index, then
//! outcome index), so results are bit-identical for any thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::{instrument_apply, Instrument, InstrumentStep, WeightedState};
use crate::resolved::ResolvedState;
use crate::scalar::{real, Real};
use crate::tolerances::Tolerances;

/// Knobs for the deterministic engine.
#[derive(Debug, Clone)]
pub struct StepSettings<T> {
    /// Entries with trace below this are removed after each step; the
    /// removed trace is added to the leaked-mass accumulator. Zero disables
    /// pruning.
    pub prune_threshold: T,
    /// Hard cap on the number of occupied lattice points.
    pub max_support: usize,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> Default for StepSettings<T> {
    fn default() -> Self {
        Self {
            prune_threshold: real(1e-12),
            max_support: 4_000_000,
            tolerances: Tolerances::default(),
        }
    }
}

impl<T: Real> StepSettings<T> {
    /// No pruning; used by oracle-equivalence checks.
    pub fn exact() -> Self {
        Self {
            prune_threshold: T::zero(),
            ..Self::default()
        }
    }
}

/// Advances the resolved state by one measurement-feedback round.
///
/// Total trace is conserved within the conservation tolerance before
/// pruning; zero-probability branches produce zero-trace contributions that
/// pruning removes without special casing.
pub fn det_step<T: Real>(
    state: &ResolvedState<T>,
    inst: &Instrument<T>,
    settings: &StepSettings<T>,
) -> Result<ResolvedState<T>> {
    let lattice = state.lattice();
    let next_step = state.step() + 1;
    let n_outcomes = inst.n_outcomes();

    let sources: Vec<(usize, &WeightedState<T>)> = state.entries().collect();
    let fanned: Vec<Result<Vec<InstrumentStep<T>>>> = sources
        .par_iter()
        .map(|&(src_idx, w)| {
            let y = lattice.point(src_idx);
            (0..n_outcomes)
                .map(|x| instrument_apply(inst, lattice, next_step, x, &y, w))
                .collect()
        })
        .collect();

    let mut entries: BTreeMap<usize, WeightedState<T>> = BTreeMap::new();
    let mut clip_events = 0u64;
    for group in fanned {
        for out in group? {
            if out.clipped {
                clip_events += 1;
            }
            match entries.entry(out.index) {
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(out.state);
                }
                std::collections::btree_map::Entry::Occupied(mut slot) => {
                    let merged = {
                        let acc = slot.get().matrix().clone();
                        let mut acc = acc;
                        acc += out.state.matrix();
                        acc
                    };
                    *slot.get_mut() = WeightedState::from_matrix_unchecked(merged);
                }
            }
        }
    }

    if entries.len() > settings.max_support {
        return Err(Error::SupportOverflow {
            entries: entries.len(),
            max: settings.max_support,
        });
    }

    let before = state.total_trace();
    let after: T = entries.values().map(|w| w.weight()).sum();
    let drift = (after - before).abs();
    if drift > settings.tolerances.conservation {
        return Err(Error::ConservationViolated {
            drift: drift.to_f64().unwrap_or(f64::NAN),
            tolerance: settings
                .tolerances
                .conservation
                .to_f64()
                .unwrap_or(f64::NAN),
        });
    }

    let mut leaked = state.leaked_mass();
    if settings.prune_threshold > T::zero() {
        let doomed: Vec<usize> = entries
            .iter()
            .filter(|(_, w)| w.weight() < settings.prune_threshold)
            .map(|(&idx, _)| idx)
            .collect();
        for idx in doomed {
            if let Some(w) = entries.remove(&idx) {
                leaked += w.weight();
            }
        }
    }

    Ok(ResolvedState::from_parts(
        state.lattice().clone(),
        entries,
        next_step,
        leaked,
        state.clip_count() + clip_events,
    ))
}

/// Runs `n` deterministic steps.
pub fn det_run<T: Real>(
    state: &ResolvedState<T>,
    inst: &Instrument<T>,
    n_steps: u64,
    settings: &StepSettings<T>,
) -> Result<ResolvedState<T>> {
    let mut current = state.clone();
    for _ in 0..n_steps {
        current = det_step(&current, inst, settings)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::quantum::{ChannelFamily, DensityMatrix, KrausSet};
    use crate::resolved::init_resolved;
    use crate::signal::{AxisSpec, SignalLattice, SignalPoint, UpdateRule};

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    fn identity_instrument() -> Instrument<f64> {
        Instrument::new(
            KrausSet::new(vec![CMatrix::identity(2)], &tol()).unwrap(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, _, y: &SignalPoint<f64>| y.clone()),
        )
        .unwrap()
    }

    fn lattice() -> SignalLattice<f64> {
        SignalLattice::new(vec![AxisSpec {
            min: 0.0,
            max: 8.0,
            step: 1.0,
        }])
        .unwrap()
    }

    #[test]
    fn identity_instrument_keeps_the_state_fixed() {
        let rho = DensityMatrix::pure(&[
            num_complex::Complex64::new(0.6, 0.0),
            num_complex::Complex64::new(0.0, 0.8),
        ]);
        let initial = init_resolved(&rho, &SignalPoint::scalar(3.0), lattice()).unwrap();
        let settings = StepSettings::default();
        let inst = identity_instrument();
        let evolved = det_run(&initial, &inst, 5, &settings).unwrap();
        assert_eq!(evolved.step(), 5);
        assert_eq!(evolved.support_size(), 1);
        assert!(
            evolved
                .entry(3)
                .unwrap()
                .matrix()
                .max_abs_diff(rho.matrix())
                < 1e-12
        );
    }

    #[test]
    fn support_cap_is_enforced() {
        // Branching counting instrument grows the support; cap it at 1.
        let kraus = {
            let p0 = CMatrix::diag_re(&[1.0, 0.0]);
            let p1 = CMatrix::diag_re(&[0.0, 1.0]);
            KrausSet::new(vec![p0, p1], &tol()).unwrap()
        };
        let inst = Instrument::new(
            kraus,
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
                SignalPoint::scalar(y.component(0) + x as f64)
            }),
        )
        .unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let initial = init_resolved(&rho, &SignalPoint::scalar(0.0), lattice()).unwrap();
        let settings = StepSettings {
            max_support: 1,
            ..StepSettings::default()
        };
        assert!(matches!(
            det_step(&initial, &inst, &settings),
            Err(Error::SupportOverflow { .. })
        ));
    }

    #[test]
    fn signal_distribution_is_symmetric_under_outcome_sign_flip() {
        // Counting with outcome values ±1 from an unbiased state spreads
        // symmetrically around the origin.
        let model = crate::models::qubit_counting::<f64>(5).unwrap();
        let lattice = SignalLattice::new(vec![AxisSpec {
            min: -5.0,
            max: 5.0,
            step: 1.0,
        }])
        .unwrap();
        let inst = Instrument::new(
            model.instrument.kraus().clone(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
                SignalPoint::scalar(y.component(0) + (2.0 * x as f64 - 1.0))
            }),
        )
        .unwrap();
        let initial = init_resolved(
            &DensityMatrix::maximally_mixed(2),
            &SignalPoint::scalar(0.0),
            lattice.clone(),
        )
        .unwrap();
        let state = det_run(&initial, &inst, 5, &StepSettings::exact()).unwrap();
        let dist = state.signal_distribution();
        for (&idx, &p) in &dist {
            let s = lattice.point(idx).component(0);
            let (mirror, _) = lattice.project(&SignalPoint::scalar(-s)).unwrap();
            let q = dist.get(&mirror).copied().unwrap_or(0.0);
            assert!((p - q).abs() < 1e-10, "s = {s}: {p} vs {q}");
        }
    }

    #[test]
    fn conditional_expectations_resolve_the_measurement_record() {
        // Literal projectors repeat their first outcome, so after three
        // rounds the support sits at the two extreme counts with definite
        // polarization.
        let p0 = CMatrix::diag_re(&[1.0, 0.0]);
        let p1 = CMatrix::diag_re(&[0.0, 1.0]);
        let inst = Instrument::new(
            KrausSet::new(vec![p0, p1], &tol()).unwrap(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
                SignalPoint::scalar(y.component(0) + x as f64)
            }),
        )
        .unwrap();
        let initial = init_resolved(
            &DensityMatrix::maximally_mixed(2),
            &SignalPoint::scalar(0.0),
            lattice(),
        )
        .unwrap();
        let state = det_run(&initial, &inst, 3, &StepSettings::exact()).unwrap();
        let (per_index, aggregate) = state
            .expectation(&crate::linalg::pauli::z::<f64>(), &tol())
            .unwrap();
        assert!((per_index[&0] - 1.0).abs() < 1e-9);
        assert!((per_index[&3] + 1.0).abs() < 1e-9);
        assert!(aggregate.abs() < 1e-9);
    }

    #[test]
    fn one_step_marginal_is_the_non_selective_measurement_map() {
        // Identity feedback channels: the marginal after one round must be
        // Σ_x K_x ρ K_x†, computed here directly as the oracle.
        let mut rng = crate::random::rng_from_seed(2024);
        let kraus = crate::random::random_kraus::<f64, _>(&mut rng, 2, 3);
        let rho0 = crate::random::random_density::<f64, _>(&mut rng, 2);
        let inst = Instrument::new(
            kraus.clone(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
                SignalPoint::scalar(y.component(0) + x as f64)
            }),
        )
        .unwrap();
        let initial = init_resolved(&rho0, &SignalPoint::scalar(0.0), lattice()).unwrap();
        let state = det_step(&initial, &inst, &StepSettings::exact()).unwrap();
        let marginal = state.marginal_quantum(&tol()).unwrap();

        let mut oracle = CMatrix::zeros(2);
        for k in kraus.operators() {
            oracle += &k.sandwich(rho0.matrix());
        }
        assert!(marginal.matrix().max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn pruning_moves_trace_into_leaked_mass() {
        // A lopsided projective measurement leaves a tiny branch that the
        // prune threshold removes.
        let p0 = CMatrix::diag_re(&[1.0, 0.0]);
        let p1 = CMatrix::diag_re(&[0.0, 1.0]);
        let inst = Instrument::new(
            KrausSet::new(vec![p0, p1], &tol()).unwrap(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
                SignalPoint::scalar(y.component(0) + x as f64)
            }),
        )
        .unwrap();
        let rho = DensityMatrix::classical(&[1.0 - 1e-9, 1e-9], &tol()).unwrap();
        let initial = init_resolved(&rho, &SignalPoint::scalar(0.0), lattice()).unwrap();
        let settings = StepSettings {
            prune_threshold: 1e-6,
            ..StepSettings::default()
        };
        let stepped = det_step(&initial, &inst, &settings).unwrap();
        assert_eq!(stepped.support_size(), 1);
        assert!((stepped.leaked_mass() - 1e-9).abs() < 1e-15);
        assert!((stepped.total_trace() + stepped.leaked_mass() - 1.0).abs() < 1e-12);
    }
}
