// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic random states and measurements for property tests and
//! randomized checks.

use num_complex::Complex;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::linalg::CMatrix;
use crate::quantum::{DensityMatrix, KrausSet};
use crate::scalar::{real, Real};
use crate::tolerances::Tolerances;

pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform in `[-1, 1)`.
pub fn uniform_signed<T: Real, R: RngCore>(rng: &mut R) -> T {
    let bits = rng.next_u64() >> 11;
    real::<T>(bits as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
}

pub fn random_matrix<T: Real, R: RngCore>(rng: &mut R, dim: usize) -> CMatrix<T> {
    CMatrix::from_fn(dim, |_, _| {
        Complex::new(uniform_signed(rng), uniform_signed(rng))
    })
}

pub fn random_hermitian<T: Real, R: RngCore>(rng: &mut R, dim: usize) -> CMatrix<T> {
    random_matrix(rng, dim).hermitized()
}

/// Random full-rank density matrix `AA† / tr(AA†)`.
pub fn random_density<T: Real, R: RngCore>(rng: &mut R, dim: usize) -> DensityMatrix<T> {
    let a = random_matrix::<T, _>(rng, dim);
    let psd = a.matmul(&a.adjoint());
    let tr = psd.trace_re();
    DensityMatrix::new(psd.scaled_re(T::one() / tr), &Tolerances::default())
        .expect("AA†/tr is a valid state")
}

/// Random complete Kraus set: raw matrices `B_x` whitened by
/// `S^{-1/2}` with `S = Σ B†B`, so completeness holds by construction.
pub fn random_kraus<T: Real, R: RngCore>(
    rng: &mut R,
    dim: usize,
    n_outcomes: usize,
) -> KrausSet<T> {
    loop {
        let raw: Vec<CMatrix<T>> = (0..n_outcomes).map(|_| random_matrix(rng, dim)).collect();
        let mut gram = CMatrix::zeros(dim);
        for b in &raw {
            gram += &b.adjoint().matmul(b);
        }
        let Ok(whiten) = gram.inv_sqrt_psd(real(1e-8)) else {
            continue;
        };
        let ops: Vec<CMatrix<T>> = raw.iter().map(|b| b.matmul(&whiten)).collect();
        if let Ok(set) = KrausSet::new(ops, &Tolerances::default()) {
            return set;
        }
    }
}
