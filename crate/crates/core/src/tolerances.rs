// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Numerical tolerances used by validating constructors and engines.

use crate::scalar::{real, Real};

/// All validation thresholds in one record.
///
/// At `f64` the defaults are exactly the values below; at lower precision
/// they widen to a multiple of the scalar's epsilon so that round-off in
/// ordinary constructions (normalized Kraus families, accumulated traces)
/// does not trip the validators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Max allowed `|A - A†|` entry for Hermitian checks.
    pub hermiticity: T,
    /// Min eigenvalue may dip to `-positivity` and still count as PSD.
    pub positivity: T,
    /// Max allowed `|tr ρ - 1|` for density matrices.
    pub unit_trace: T,
    /// Max allowed `|ΣK†K - 1|` entry for Kraus completeness, unitarity,
    /// and probability-sum drift.
    pub completeness: T,
    /// Max allowed per-step drift of total trace plus leaked mass.
    pub conservation: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        let tight = T::epsilon() * real(256.0);
        let loose = T::epsilon() * real(1024.0);
        Self {
            hermiticity: real::<T>(1e-10).max(tight),
            positivity: real::<T>(1e-10).max(tight),
            unit_trace: real::<T>(1e-10).max(tight),
            completeness: real::<T>(1e-9).max(loose),
            conservation: real::<T>(1e-9).max(loose),
        }
    }
}

/// Outcome probabilities below this floor are treated as unnormalizable:
/// the branch state must not be divided by its trace.
pub fn probability_floor<T: Real>() -> T {
    real(1e-14)
}
