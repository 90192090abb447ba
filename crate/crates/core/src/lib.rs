// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Discrete-time quantum feedback simulation with signal processing that
//! may depend on past measurement results.
//!
//! A feedback round consists of a generalized measurement (Kraus
//! operators), a classical update of a signal vector, and a
//! signal-dependent CPTP feedback channel. Memory-dependent signal rules
//! are rewritten as memoryless updates on an enlarged signal vector
//! ([`signal::markovian_embed_momentum`], [`signal::markovian_embed_history`]),
//! which makes the ensemble dynamics a deterministic linear recursion over
//! a finite signal lattice.
//!
//! Three engines operate on the same instrument abstraction:
//!
//! - [`det::det_step`] propagates the signal-resolved ensemble state
//!   deterministically over the sparse lattice support;
//! - [`trajectory::ensemble_estimate`] averages stochastic conditional
//!   trajectories (reproducible, counter-based RNG streams);
//! - [`trajectory::enumerate_paths`] sums every outcome sequence exactly
//!   and serves as the ground truth the other two are validated against.
//!
//! All core math is generic over the real scalar ([`Real`], `f32`/`f64`);
//! the aliases below fix `f64`, which is what the shipped models, the
//! default tolerances, and the CLI use.

pub mod det;
pub mod error;
pub mod linalg;
pub mod models;
pub mod quantum;
pub mod random;
pub mod resolved;
pub mod scalar;
pub mod signal;
pub mod tolerances;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::{real, Real};
pub use tolerances::Tolerances;

pub use num_complex::Complex;

/// `f64` instantiations of the core types; the precision everything ships at.
pub type CMatrixF64 = linalg::CMatrix<f64>;
pub type DensityMatrixF64 = quantum::DensityMatrix<f64>;
pub type WeightedStateF64 = quantum::WeightedState<f64>;
pub type KrausSetF64 = quantum::KrausSet<f64>;
pub type QuantumChannelF64 = quantum::QuantumChannel<f64>;
pub type ChannelFamilyF64 = quantum::ChannelFamily<f64>;
pub type InstrumentF64 = quantum::Instrument<f64>;
pub type SignalPointF64 = signal::SignalPoint<f64>;
pub type SignalLatticeF64 = signal::SignalLattice<f64>;
pub type UpdateRuleF64 = signal::UpdateRule<f64>;
pub type NonMarkovianRuleF64 = signal::NonMarkovianRule<f64>;
pub type ResolvedStateF64 = resolved::ResolvedState<f64>;
pub type ModelF64 = models::Model<f64>;
pub type TolerancesF64 = Tolerances<f64>;
