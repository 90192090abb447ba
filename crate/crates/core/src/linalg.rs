// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrices for small Hilbert spaces (d ≤ 16 in practice).
//!
//! Everything an instrument needs lives here: products, adjoints, traces,
//! a Jacobi eigensolver for Hermitian matrices, and a scaling-and-squaring
//! matrix exponential with a Padé(13) core.

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Square complex matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have length `rows.len()`.
    pub fn from_rows(rows: &[&[Complex<T>]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix from complex entries.
    pub fn diag(entries: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * m.dim + i] = e;
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag_re(entries: &[T]) -> Self {
        let cs: Vec<Complex<T>> = entries
            .iter()
            .map(|&x| Complex::new(x, T::zero()))
            .collect();
        Self::diag(&cs)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn scaled_re(&self, s: T) -> Self {
        self.scaled(Complex::new(s, T::zero()))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Real part of the trace; the imaginary part is rounding noise for the
    /// Hermitian matrices the engines move around.
    pub fn trace_re(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        out
    }

    /// `A ρ A†` in one call; the workhorse of every Kraus application.
    pub fn sandwich(&self, rho: &Self) -> Self {
        self.matmul(rho).matmul(&self.adjoint())
    }

    pub fn max_abs_entry(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Max column sum of entry moduli (the induced 1-norm).
    pub fn one_norm(&self) -> T {
        let d = self.dim;
        let mut best = T::zero();
        for j in 0..d {
            let s: T = (0..d).map(|i| self.data[i * d + j].norm()).sum();
            best = best.max(s);
        }
        best
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Max `|A - A†|` entry. The upper triangle covers every pair since
    /// `|a_ij - conj(a_ji)|` is symmetric under swapping i and j.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let dev = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// `(A + A†) / 2`.
    pub fn hermitized(&self) -> Self {
        let half = real::<T>(0.5);
        Self::from_fn(self.dim, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * Complex::new(half, T::zero())
        })
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigvalsh(&self) -> Result<Vec<T>> {
        Ok(self.eigh()?.0)
    }

    pub fn min_eigval(&self) -> Result<T> {
        let vals = self.eigvalsh()?;
        Ok(vals[0])
    }

    /// Eigendecomposition of the Hermitian part by cyclic complex Jacobi
    /// rotations. Returns ascending eigenvalues and the unitary whose
    /// columns are the matching eigenvectors, so `A ≈ V Λ V†`.
    pub fn eigh(&self) -> Result<(Vec<T>, CMatrix<T>)> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let d = self.dim;
        let mut a = self.hermitized();
        let mut v = Self::identity(d);
        if d <= 1 {
            let vals = if d == 1 { vec![a.get(0, 0).re] } else { vec![] };
            return Ok((vals, v));
        }

        let scale = a.frobenius_norm().max(T::min_positive_value());
        let target = T::epsilon() * scale;
        const MAX_SWEEPS: usize = 60;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut off = T::zero();
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a.get(i, j).norm_sqr();
                }
            }
            if off.sqrt() <= target {
                converged = true;
                break;
            }
            for p in 0..d - 1 {
                for q in (p + 1)..d {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged {
            // One last check after the final sweep.
            let mut off = T::zero();
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a.get(i, j).norm_sqr();
                }
            }
            if off.sqrt() > target * real(16.0) {
                return Err(Error::EigNotConverged { sweeps: MAX_SWEEPS });
            }
        }

        let mut pairs: Vec<(T, usize)> = (0..d).map(|i| (a.get(i, i).re, i)).collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("eigenvalues are finite"));
        let vals: Vec<T> = pairs.iter().map(|p| p.0).collect();
        let vecs = Self::from_fn(d, |i, j| v.get(i, pairs[j].1));
        Ok((vals, vecs))
    }

    /// Inverse square root of a positive definite Hermitian matrix.
    pub fn inv_sqrt_psd(&self, floor: T) -> Result<Self> {
        let (vals, vecs) = self.eigh()?;
        if vals[0] <= floor {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: vals[0].to_f64().unwrap_or(f64::NAN),
            });
        }
        let inv: Vec<T> = vals.iter().map(|&l| T::one() / l.sqrt()).collect();
        let lam = Self::diag_re(&inv);
        Ok(vecs.matmul(&lam).matmul(&vecs.adjoint()))
    }
}

/// Zeroes `a[p][q]` with a unitary two-plane rotation, accumulating it in `v`.
fn jacobi_rotate<T: Real>(a: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize) {
    let g = a.get(p, q);
    let gn = g.norm();
    if gn.is_zero() {
        return;
    }
    let alpha = a.get(p, p).re;
    let beta = a.get(q, q).re;
    let theta = (alpha - beta) / (gn + gn);
    let t = {
        let denom = theta.abs() + (theta * theta + T::one()).sqrt();
        let magnitude = T::one() / denom;
        if theta < T::zero() {
            -magnitude
        } else {
            magnitude
        }
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let sigma = t * c;
    let phase = g / Complex::new(gn, T::zero());
    let s = phase.conj() * Complex::new(sigma, T::zero());
    let cc = Complex::new(c, T::zero());

    let d = a.dim();
    // Columns p and q: A <- A·J.
    for i in 0..d {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * cc + aiq * s);
        a.set(i, q, aiq * cc - aip * s.conj());
    }
    // Rows p and q: A <- J†·A.
    for j in 0..d {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * cc + aqj * s.conj());
        a.set(q, j, aqj * cc - apj * s);
    }
    // Keep the rotated diagonal exactly real.
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    a.set(p, p, Complex::new(app.re, T::zero()));
    a.set(q, q, Complex::new(aqq.re, T::zero()));
    a.set(p, q, Complex::new(T::zero(), T::zero()));
    a.set(q, p, Complex::new(T::zero(), T::zero()));
    // Eigenvector accumulator: V <- V·J.
    for i in 0..d {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * cc + viq * s);
        v.set(i, q, viq * cc - vip * s.conj());
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        debug_assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        debug_assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> AddAssign<&CMatrix<T>> for CMatrix<T> {
    fn add_assign(&mut self, rhs: &CMatrix<T>) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a = *a + *b;
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for row in self.data.chunks(self.dim.max(1)) {
            write!(f, "  [")?;
            for c in row {
                write!(f, " {:?}+{:?}i", c.re, c.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Padé(13) numerator/denominator coefficients for the matrix exponential.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Norm threshold above which the argument is scaled down before the Padé
/// approximation (Higham's θ₁₃).
const PADE13_THETA: f64 = 5.371_920_351_148_152;

/// Generators with a 1-norm beyond this are rejected instead of silently
/// overflowing.
const EXP_NORM_CAP: f64 = 300.0;

/// Matrix exponential by scaling-and-squaring with a Padé(13) core.
///
/// Relative accuracy is at the scalar's rounding level for `‖a‖₁ ≲ 10`,
/// which covers every generator the channel families produce.
pub fn matrix_exponential<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let d = a.dim();
    if d == 0 {
        return Ok(CMatrix::zeros(0));
    }
    let norm = a.one_norm();
    if norm > real(EXP_NORM_CAP) {
        return Err(Error::ExpOverflow {
            norm: norm.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    if norm.is_zero() {
        return Ok(CMatrix::identity(d));
    }

    let theta: T = real(PADE13_THETA);
    let squarings = if norm > theta {
        (norm / theta).log2().ceil().to_u32().unwrap_or(0)
    } else {
        0
    };
    let scale = real::<T>(0.5).powi(squarings as i32);
    let scaled = a.scaled_re(scale);

    let mut result = pade13(&scaled)?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(result)
}

fn pade13<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let d = a.dim();
    let eye = CMatrix::identity(d);
    let b: Vec<T> = PADE13.iter().map(|&x| real(x)).collect();
    let cb = |x: T| Complex::new(x, T::zero());

    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    let w1 = &(&a6.scaled(cb(b[13])) + &a4.scaled(cb(b[11]))) + &a2.scaled(cb(b[9]));
    let w2 = &(&(&w1.matmul(&a6) + &a6.scaled(cb(b[7]))) + &a4.scaled(cb(b[5])))
        + &(&a2.scaled(cb(b[3])) + &eye.scaled(cb(b[1])));
    let u = a.matmul(&w2);

    let z1 = &(&a6.scaled(cb(b[12])) + &a4.scaled(cb(b[10]))) + &a2.scaled(cb(b[8]));
    let v = &(&(&z1.matmul(&a6) + &a6.scaled(cb(b[6]))) + &a4.scaled(cb(b[4])))
        + &(&a2.scaled(cb(b[2])) + &eye.scaled(cb(b[0])));

    let numer = &v + &u;
    let denom = &v - &u;
    solve(&denom, &numer)
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.dim(),
        });
    }
    let mut lhs = a.clone();
    let mut rhs = b.clone();

    for col in 0..d {
        let mut pivot = col;
        let mut best = lhs.get(col, col).norm();
        for row in (col + 1)..d {
            let mag = lhs.get(row, col).norm();
            if mag > best {
                best = mag;
                pivot = row;
            }
        }
        if best.is_zero() {
            return Err(Error::SingularMatrix);
        }
        if pivot != col {
            for j in 0..d {
                let tmp = lhs.get(col, j);
                lhs.set(col, j, lhs.get(pivot, j));
                lhs.set(pivot, j, tmp);
                let tmp = rhs.get(col, j);
                rhs.set(col, j, rhs.get(pivot, j));
                rhs.set(pivot, j, tmp);
            }
        }
        let inv = Complex::new(T::one(), T::zero()) / lhs.get(col, col);
        for row in (col + 1)..d {
            let factor = lhs.get(row, col) * inv;
            if factor.norm().is_zero() {
                continue;
            }
            for j in col..d {
                let v = lhs.get(row, j) - factor * lhs.get(col, j);
                lhs.set(row, j, v);
            }
            for j in 0..d {
                let v = rhs.get(row, j) - factor * rhs.get(col, j);
                rhs.set(row, j, v);
            }
        }
    }

    let mut x = CMatrix::zeros(d);
    for col in 0..d {
        for row in (0..d).rev() {
            let mut acc = rhs.get(row, col);
            for k in (row + 1)..d {
                acc -= lhs.get(row, k) * x.get(k, col);
            }
            x.set(row, col, acc / lhs.get(row, row));
        }
    }
    Ok(x)
}

/// Pauli matrices, the staple test operators for qubit models.
pub mod pauli {
    use super::CMatrix;
    use crate::scalar::Real;
    use num_complex::Complex;

    pub fn x<T: Real>() -> CMatrix<T> {
        let o = Complex::new(T::one(), T::zero());
        let z = Complex::new(T::zero(), T::zero());
        CMatrix::from_rows(&[&[z, o], &[o, z]]).expect("static 2x2")
    }

    pub fn y<T: Real>() -> CMatrix<T> {
        let i = Complex::new(T::zero(), T::one());
        let z = Complex::new(T::zero(), T::zero());
        CMatrix::from_rows(&[&[z, -i], &[i, z]]).expect("static 2x2")
    }

    pub fn z<T: Real>() -> CMatrix<T> {
        let o = Complex::new(T::one(), T::zero());
        let z = Complex::new(T::zero(), T::zero());
        CMatrix::from_rows(&[&[o, z], &[z, -o]]).expect("static 2x2")
    }
}
