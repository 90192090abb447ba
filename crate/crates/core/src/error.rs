// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by constructors, operators, and engines.
///
/// Diagnostic magnitudes are reported as `f64` regardless of the scalar the
/// computation ran at.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |A - A†| entry = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("state trace {trace} outside the allowed range")]
    BadTrace { trace: f64 },

    #[error("Kraus set is empty")]
    EmptyKrausSet,

    #[error("Kraus completeness violated: max |ΣK†K - 1| entry = {deficit:e}")]
    IncompleteKraus { deficit: f64 },

    #[error("operator is not unitary: max |U†U - 1| entry = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("probability vector sums to {sum}, drift {drift:e} exceeds tolerance")]
    ProbabilityDrift { sum: f64, drift: f64 },

    #[error("all outcome probabilities below {floor:e}; Kraus set cannot be complete")]
    DegenerateProbabilities { floor: f64 },

    #[error("no channel stored for lattice index {index}")]
    MissingChannel { index: usize },

    #[error("channel family couples {couplings} signal components but the point has {dim}")]
    CouplingMismatch { couplings: usize, dim: usize },

    #[error("matrix norm {norm:e} too large for the exponential; rescale the generator")]
    ExpOverflow { norm: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    EigNotConverged { sweeps: usize },

    #[error("linear solve hit a singular pivot")]
    SingularMatrix,

    #[error("lattice axis invalid: {reason}")]
    BadLatticeAxis { reason: String },

    #[error("lattice has {size} points, exceeding the cap of {cap}")]
    LatticeTooLarge { size: u128, cap: u128 },

    #[error(
        "support grew to {entries} entries (max {max}); use a coarser lattice or a higher \
         prune threshold"
    )]
    SupportOverflow { entries: usize, max: usize },

    #[error("trace conservation violated in one step: drift {drift:e} exceeds {tolerance:e}")]
    ConservationViolated { drift: f64, tolerance: f64 },

    #[error("resolved state has empty support")]
    EmptySupport,

    #[error("path enumeration needs {paths} branches, exceeding the cap of {cap}")]
    PathCapExceeded { paths: u128, cap: u128 },

    #[error("unstable parameters: {reason}")]
    UnstableParams { reason: String },

    #[error("invalid model parameter: {reason}")]
    BadModelParameter { reason: String },

    #[error(
        "outcome bin grid too narrow or asymmetric: completeness deficit {deficit:e}; \
         use a symmetric range covering both measurement poles, e.g. [{suggested_lo}, \
         {suggested_hi}]"
    )]
    BinGridTooNarrow {
        deficit: f64,
        suggested_lo: f64,
        suggested_hi: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
