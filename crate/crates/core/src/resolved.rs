// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! The signal-resolved ensemble state: one subnormalized quantum state per
//! occupied lattice point, plus bookkeeping for pruned trace and clipping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{DensityMatrix, WeightedState};
use crate::scalar::{real, Real};
use crate::signal::{SignalLattice, SignalPoint};
use crate::tolerances::Tolerances;

/// Joint classical-quantum state over the signal lattice.
///
/// The trace of each entry is the probability of that signal value; the sum
/// of all entries is the unconditional quantum state (up to pruned mass).
/// Mass removed by pruning accumulates in `leaked_mass` so conservation
/// violations stay observable instead of being silently renormalized.
#[derive(Debug, Clone)]
pub struct ResolvedState<T: Real> {
    lattice: SignalLattice<T>,
    entries: BTreeMap<usize, WeightedState<T>>,
    step: u64,
    leaked_mass: T,
    clip_count: u64,
}

impl<T: Real> ResolvedState<T> {
    /// Assembles a resolved state from validated pieces; callers rebuilding
    /// states (file ingest, rebinning) should run [`Self::validate`] after.
    pub fn from_parts(
        lattice: SignalLattice<T>,
        entries: BTreeMap<usize, WeightedState<T>>,
        step: u64,
        leaked_mass: T,
        clip_count: u64,
    ) -> Self {
        Self {
            lattice,
            entries,
            step,
            leaked_mass,
            clip_count,
        }
    }

    pub fn lattice(&self) -> &SignalLattice<T> {
        &self.lattice
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn leaked_mass(&self) -> T {
        self.leaked_mass
    }

    pub fn clip_count(&self) -> u64 {
        self.clip_count
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &WeightedState<T>)> {
        self.entries.iter().map(|(&idx, w)| (idx, w))
    }

    pub fn entry(&self, index: usize) -> Option<&WeightedState<T>> {
        self.entries.get(&index)
    }

    /// Sum of all entry traces (excludes leaked mass).
    pub fn total_trace(&self) -> T {
        self.entries.values().map(|w| w.weight()).sum()
    }

    /// Checks conservation and the per-entry state invariants.
    pub fn validate(&self, tol: &Tolerances<T>) -> Result<()> {
        let drift = (self.total_trace() + self.leaked_mass - T::one()).abs();
        if drift > tol.conservation {
            return Err(Error::ConservationViolated {
                drift: drift.to_f64().unwrap_or(f64::NAN),
                tolerance: tol.conservation.to_f64().unwrap_or(f64::NAN),
            });
        }
        for w in self.entries.values() {
            w.validate(tol)?;
        }
        Ok(())
    }

    /// The unconditional quantum state: the sum over the support,
    /// renormalized by the mass still on the lattice.
    ///
    /// Callers should treat a leaked mass above ~1e-6 as a warning sign;
    /// the marginal is then conditioned on the unpruned part of the
    /// ensemble.
    pub fn marginal_quantum(&self, tol: &Tolerances<T>) -> Result<DensityMatrix<T>> {
        let first = self.entries.values().next().ok_or(Error::EmptySupport)?;
        let mut sum = CMatrix::zeros(first.dim());
        for w in self.entries.values() {
            sum += w.matrix();
        }
        let kept = T::one() - self.leaked_mass;
        DensityMatrix::new(sum.scaled_re(T::one() / kept), tol)
    }

    /// Classical marginal: probability of each occupied signal value.
    pub fn signal_distribution(&self) -> BTreeMap<usize, T> {
        self.entries
            .iter()
            .map(|(&idx, w)| (idx, w.weight()))
            .collect()
    }

    /// Per-signal conditional expectations of a Hermitian observable and the
    /// trace-weighted aggregate. Entries with nonpositive weight are skipped.
    ///
    /// The aggregate equals `tr[obs · marginal]` by linearity.
    pub fn expectation(
        &self,
        obs: &CMatrix<T>,
        tol: &Tolerances<T>,
    ) -> Result<(BTreeMap<usize, T>, T)> {
        let dev = obs.hermiticity_error();
        if dev > tol.hermiticity {
            return Err(Error::NotHermitian {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut per_index = BTreeMap::new();
        let mut aggregate = T::zero();
        for (&idx, w) in &self.entries {
            if obs.dim() != w.dim() {
                return Err(Error::DimensionMismatch {
                    expected: w.dim(),
                    got: obs.dim(),
                });
            }
            let value = obs.matmul(w.matrix()).trace_re();
            aggregate += value;
            let weight = w.weight();
            if weight > T::zero() {
                per_index.insert(idx, value / weight);
            }
        }
        let kept = T::one() - self.leaked_mass;
        Ok((per_index, aggregate / kept))
    }

    /// The mean signal vector under the signal distribution.
    pub fn signal_mean(&self) -> SignalPoint<T> {
        let dim = self.lattice.dim();
        let mut mean = vec![T::zero(); dim];
        let mut mass = T::zero();
        for (&idx, w) in &self.entries {
            let p = w.weight();
            mass += p;
            let y = self.lattice.point(idx);
            for (m, &c) in mean.iter_mut().zip(y.components()) {
                *m += p * c;
            }
        }
        if mass > T::zero() {
            for c in &mut mean {
                *c /= mass;
            }
        }
        SignalPoint::new(mean)
    }

    /// Variance of one signal component under the signal distribution.
    pub fn signal_variance(&self, component: usize) -> T {
        let mean = self.signal_mean().component(component);
        let mut var = T::zero();
        let mut mass = T::zero();
        for (&idx, w) in &self.entries {
            let p = w.weight();
            mass += p;
            let d = self.lattice.point(idx).component(component) - mean;
            var += p * d * d;
        }
        if mass > T::zero() {
            var / mass
        } else {
            T::zero()
        }
    }
}

/// Initial resolved state: all mass at the projection of `y0`.
pub fn init_resolved<T: Real>(
    rho0: &DensityMatrix<T>,
    y0: &SignalPoint<T>,
    lattice: SignalLattice<T>,
) -> Result<ResolvedState<T>> {
    let (index, clipped) = lattice.project(y0)?;
    let mut entries = BTreeMap::new();
    entries.insert(
        index,
        WeightedState::from_matrix_unchecked(rho0.matrix().clone()),
    );
    Ok(ResolvedState {
        lattice,
        entries,
        step: 0,
        leaked_mass: T::zero(),
        clip_count: if clipped { 1 } else { 0 },
    })
}

/// Max entrywise difference between two resolved states over the union of
/// their supports; absent entries count as zero matrices.
pub fn max_entrywise_diff<T: Real>(a: &ResolvedState<T>, b: &ResolvedState<T>) -> T {
    let mut worst = T::zero();
    let zero_dim = a
        .entries
        .values()
        .chain(b.entries.values())
        .map(|w| w.dim())
        .next()
        .unwrap_or(0);
    let zero = CMatrix::zeros(zero_dim);
    let indices: std::collections::BTreeSet<usize> =
        a.entries.keys().chain(b.entries.keys()).copied().collect();
    for idx in indices {
        let ma = a.entries.get(&idx).map(|w| w.matrix()).unwrap_or(&zero);
        let mb = b.entries.get(&idx).map(|w| w.matrix()).unwrap_or(&zero);
        worst = worst.max(ma.max_abs_diff(mb));
    }
    worst
}

/// Total-variation distance between the signal distributions of two
/// resolved states.
pub fn total_variation<T: Real>(a: &ResolvedState<T>, b: &ResolvedState<T>) -> T {
    let pa = a.signal_distribution();
    let pb = b.signal_distribution();
    let indices: std::collections::BTreeSet<usize> = pa.keys().chain(pb.keys()).copied().collect();
    let mut sum = T::zero();
    for idx in indices {
        let x = pa.get(&idx).copied().unwrap_or_else(T::zero);
        let y = pb.get(&idx).copied().unwrap_or_else(T::zero);
        sum += (x - y).abs();
    }
    sum * real(0.5)
}
