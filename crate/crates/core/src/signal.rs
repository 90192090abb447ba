// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Classical signal vectors, finite lattices, update rules, and the
//! constructions that turn memory-dependent rules into memoryless updates
//! on an enlarged signal vector.
//!
//! The embedding transformations work on exact (unprojected) points; the
//! engines project onto the lattice only when they store or route mass.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// A point in signal space: `D` real components. The first component is the
/// instantaneous signal; further components carry memory (momenta).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPoint<T>(Vec<T>);

impl<T: Real> SignalPoint<T> {
    pub fn new(components: Vec<T>) -> Self {
        Self(components)
    }

    pub fn scalar(s: T) -> Self {
        Self(vec![s])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn component(&self, k: usize) -> T {
        self.0[k]
    }

    pub fn components(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// One lattice axis: uniform grid `min, min + step, …` capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec<T> {
    pub min: T,
    pub max: T,
    pub step: T,
}

#[derive(Debug, Clone)]
struct Axis<T> {
    min: T,
    max: T,
    step: T,
    count: usize,
}

/// Finite uniform grid over signal space. Lattice points are addressed by a
/// single linear index (first axis slowest, last axis fastest).
#[derive(Debug, Clone)]
pub struct SignalLattice<T> {
    axes: Vec<Axis<T>>,
    /// Precomputed strides for the linear index.
    strides: Vec<usize>,
    size: usize,
}

/// Default cap on the total number of lattice points.
pub const DEFAULT_LATTICE_CAP: u128 = 10_000_000;

impl<T: Real> SignalLattice<T> {
    pub fn new(axes: Vec<AxisSpec<T>>) -> Result<Self> {
        Self::with_cap(axes, DEFAULT_LATTICE_CAP)
    }

    pub fn with_cap(specs: Vec<AxisSpec<T>>, cap: u128) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::BadLatticeAxis {
                reason: "lattice needs at least one axis".into(),
            });
        }
        let mut axes = Vec::with_capacity(specs.len());
        let mut size: u128 = 1;
        for spec in &specs {
            if !(spec.min.is_finite() && spec.max.is_finite() && spec.step.is_finite()) {
                return Err(Error::BadLatticeAxis {
                    reason: "non-finite axis bounds".into(),
                });
            }
            if spec.step <= T::zero() {
                return Err(Error::BadLatticeAxis {
                    reason: "step must be positive".into(),
                });
            }
            if spec.max < spec.min {
                return Err(Error::BadLatticeAxis {
                    reason: "max must not be below min".into(),
                });
            }
            // Allow a relative slack of ~1e-9 steps so that a max intended to
            // land on the grid is not lost to rounding.
            let span = (spec.max - spec.min) / spec.step + real(1e-9);
            let count = span
                .floor()
                .to_usize()
                .unwrap_or(usize::MAX)
                .saturating_add(1);
            size = size.saturating_mul(count as u128);
            axes.push(Axis {
                min: spec.min,
                max: spec.max,
                step: spec.step,
                count,
            });
        }
        if size > cap {
            return Err(Error::LatticeTooLarge { size, cap });
        }
        let mut strides = vec![1usize; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].count;
        }
        Ok(Self {
            axes,
            strides,
            size: size as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn axis_count(&self, k: usize) -> usize {
        self.axes[k].count
    }

    pub fn axis_spec(&self, k: usize) -> AxisSpec<T> {
        let a = &self.axes[k];
        AxisSpec {
            min: a.min,
            max: a.max,
            step: a.step,
        }
    }

    /// Projects a raw point: per component, clamp to the axis bounds and
    /// round to the nearest grid point, exact halves rounding toward
    /// negative infinity. Returns the linear index and whether any
    /// component was clamped. Projection is deterministic and idempotent.
    pub fn project(&self, raw: &SignalPoint<T>) -> Result<(usize, bool)> {
        if raw.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: raw.dim(),
            });
        }
        if !raw.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut index = 0usize;
        let mut clipped = false;
        let half = real::<T>(0.5);
        for (k, axis) in self.axes.iter().enumerate() {
            let x = raw.component(k);
            if x < axis.min || x > axis.max {
                clipped = true;
            }
            let clamped = x.max(axis.min).min(axis.max);
            let pos = (clamped - axis.min) / axis.step;
            // Nearest grid point with ties toward -inf: ceil(pos - 1/2).
            let i = (pos - half).ceil();
            let i = i.max(T::zero()).to_usize().unwrap_or(0).min(axis.count - 1);
            index += i * self.strides[k];
        }
        Ok((index, clipped))
    }

    /// The grid point at a linear index.
    pub fn point(&self, index: usize) -> SignalPoint<T> {
        debug_assert!(index < self.size);
        let mut rest = index;
        let mut comps = Vec::with_capacity(self.axes.len());
        for (k, axis) in self.axes.iter().enumerate() {
            let i = rest / self.strides[k];
            rest %= self.strides[k];
            comps.push(axis.min + T::from_usize(i).expect("grid index fits scalar") * axis.step);
        }
        SignalPoint::new(comps)
    }
}

/// Shared closure behind an [`UpdateRule`].
pub type UpdateFn<T> = Arc<dyn Fn(u64, usize, &SignalPoint<T>) -> SignalPoint<T> + Send + Sync>;

/// Shared closure behind a [`NonMarkovianRule`].
pub type MemoryFn<T> = Arc<dyn Fn(u64, usize, &[T]) -> T + Send + Sync>;

/// Memoryless update on the embedded signal: `y_{n+1} = f(n+1, x, y_n)`.
///
/// The step argument is the index of the round being produced, so rules may
/// vary over time. The outcome is the index into the instrument's Kraus
/// list; rules that need a physical outcome value capture the value table.
#[derive(Clone)]
pub struct UpdateRule<T> {
    dim: usize,
    f: UpdateFn<T>,
}

impl<T: Real> UpdateRule<T> {
    pub fn new(
        dim: usize,
        f: impl Fn(u64, usize, &SignalPoint<T>) -> SignalPoint<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            f: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, step: u64, outcome: usize, y: &SignalPoint<T>) -> SignalPoint<T> {
        debug_assert_eq!(y.dim(), self.dim);
        let out = (self.f)(step, outcome, y);
        debug_assert_eq!(out.dim(), self.dim);
        out
    }
}

impl<T> std::fmt::Debug for UpdateRule<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "UpdateRule(dim={})", self.dim)
    }
}

/// Memory-dependent scalar rule: `s_{n+1} = g(n+1, x, s_n, …, s_{n-T})`.
///
/// `g` receives the history newest first, `memory + 1` values long.
#[derive(Clone)]
pub struct NonMarkovianRule<T> {
    memory: usize,
    g: MemoryFn<T>,
}

impl<T: Real> NonMarkovianRule<T> {
    pub fn new(memory: usize, g: impl Fn(u64, usize, &[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            memory,
            g: Arc::new(g),
        }
    }

    /// Number of past steps the rule sees beyond the current value.
    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn eval(&self, step: u64, outcome: usize, history: &[T]) -> T {
        debug_assert_eq!(history.len(), self.memory + 1);
        (self.g)(step, outcome, history)
    }
}

impl<T> std::fmt::Debug for NonMarkovianRule<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NonMarkovianRule(memory={})", self.memory)
    }
}

/// Momentum mixing weight and its continuum parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumParams<T> {
    /// Weight of the previous increment; `0` is memoryless, `1` freezes the
    /// increment.
    pub beta: T,
    /// Memory decay rate of the equivalent exponential kernel.
    pub gamma: T,
    /// Time per step.
    pub dt: T,
}

impl<T: Real> MomentumParams<T> {
    /// Purely discrete parameterization with unit time step.
    pub fn discrete(beta: T) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&beta) || !beta.is_finite() {
            return Err(Error::BadModelParameter {
                reason: format!("beta must lie in [0, 1], got {beta}"),
            });
        }
        Ok(Self {
            beta,
            gamma: T::one() - beta,
            dt: T::one(),
        })
    }

    /// Continuum parameterization `beta = 1 - gamma·dt`.
    pub fn continuum(gamma: T, dt: T) -> Result<Self> {
        if gamma < T::zero() || !gamma.is_finite() {
            return Err(Error::BadModelParameter {
                reason: format!("gamma must be non-negative, got {gamma}"),
            });
        }
        if dt <= T::zero() || !dt.is_finite() {
            return Err(Error::BadModelParameter {
                reason: format!("dt must be positive, got {dt}"),
            });
        }
        let product = gamma * dt;
        if product >= T::one() {
            return Err(Error::UnstableParams {
                reason: format!("gamma*dt = {product} must stay below 1"),
            });
        }
        Ok(Self {
            beta: T::one() - product,
            gamma,
            dt,
        })
    }
}

/// Adds an inertia term to a memoryless drift rule by tracking the previous
/// increment as a second signal component.
///
/// The embedded update on `y = (s, m)` is
/// `m' = β m + (1-β) g(n, x, s)` and `s' = s + m'`; at `β = 0` it collapses
/// to the plain increment rule `s' = s + g`.
pub fn markovian_embed_momentum<T: Real>(
    g: impl Fn(u64, usize, T) -> T + Send + Sync + 'static,
    params: MomentumParams<T>,
) -> UpdateRule<T> {
    let beta = params.beta;
    let one_minus = T::one() - beta;
    UpdateRule::new(2, move |step, x, y| {
        let s = y.component(0);
        let m = y.component(1);
        let m_next = beta * m + one_minus * g(step, x, s);
        SignalPoint::new(vec![s + m_next, m_next])
    })
}

/// Rewrites a rule that sees `memory` past steps as a memoryless update on
/// the `(memory+1)`-dimensional vector `(s, m⁽¹⁾, …, m⁽ᵐ⁾)`, where `m⁽ᵏ⁾`
/// is the k-th past increment. Past values are recovered as
/// `s_{n-k} = s_n - Σ_{j≤k} m⁽ʲ⁾`; each step shifts the increments down.
pub fn markovian_embed_history<T: Real>(rule: &NonMarkovianRule<T>) -> UpdateRule<T> {
    let rule = rule.clone();
    let dim = rule.memory() + 1;
    UpdateRule::new(dim, move |step, x, y| {
        let history = reconstruct_history(y);
        let s = y.component(0);
        let s_next = rule.eval(step, x, &history);
        let mut comps = Vec::with_capacity(dim);
        comps.push(s_next);
        if dim > 1 {
            comps.push(s_next - s);
            for k in 1..dim - 1 {
                comps.push(y.component(k));
            }
        }
        SignalPoint::new(comps)
    })
}

/// Recovers `(s_n, s_{n-1}, …, s_{n-T})` from an embedded point:
/// the k-th entry is `y[0] - Σ_{j=1..k} y[j]`.
pub fn reconstruct_history<T: Real>(y: &SignalPoint<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(y.dim());
    let mut value = y.component(0);
    out.push(value);
    for k in 1..y.dim() {
        value -= y.component(k);
        out.push(value);
    }
    out
}

/// Runs the momentum recursion against the exponential-memory kernel it
/// approaches as `dt → 0` and returns the absolute error at `t_max`.
///
/// The drive is outcome independent. The recursion uses `beta = 1 - γ·dt`
/// with increments scaled by `dt`, starting from `s(0) = m(0) = 0`; the
/// reference value is `∫₀^{t_max} (1 - e^{-γ(t_max-u)}) g(u) du`
/// evaluated by composite Gauss-Legendre quadrature (the integral of the
/// filtered drive `m(t) = γ ∫₀^t e^{-γ(t-u)} g(u) du`). First-order
/// convergence in `dt` is the expected behavior.
pub fn kernel_limit_check<T: Real>(
    params: MomentumParams<T>,
    g: impl Fn(T) -> T,
    t_max: T,
) -> Result<T> {
    let product = params.gamma * params.dt;
    if product >= real(0.5) {
        return Err(Error::UnstableParams {
            reason: format!("kernel check requires gamma*dt < 0.5, got {product}"),
        });
    }
    if t_max <= T::zero() || !t_max.is_finite() {
        return Err(Error::BadModelParameter {
            reason: format!("t_max must be positive, got {t_max}"),
        });
    }
    let dt = params.dt;
    let beta = params.beta;
    let one_minus = T::one() - beta;
    let steps = (t_max / dt + real(0.5)).floor().to_u64().unwrap_or(0);

    let mut s = T::zero();
    let mut m = T::zero();
    for k in 1..=steps {
        let t = T::from_u64(k - 1).expect("step count fits scalar") * dt;
        m = beta * m + one_minus * (dt * g(t));
        s += m;
    }

    let gamma = params.gamma;
    let t_end = T::from_u64(steps).expect("step count fits scalar") * dt;
    let reference = gauss_legendre(
        |u| (T::one() - (-gamma * (t_end - u)).exp()) * g(u),
        T::zero(),
        t_end,
        64,
    );
    Ok((s - reference).abs())
}

/// 16-point Gauss-Legendre nodes and weights on `[-1, 1]` (positive half;
/// the rule is symmetric).
const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_79,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// Composite 16-point Gauss-Legendre quadrature over `panels` subintervals.
pub fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, a: T, b: T, panels: usize) -> T {
    let panels = panels.max(1);
    let width = (b - a) / T::from_usize(panels).expect("panel count fits scalar");
    let half = real::<T>(0.5);
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + width * T::from_usize(p).expect("panel index fits scalar");
        let mid = lo + width * half;
        let scale = width * half;
        for (node, weight) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
            let dx = scale * real::<T>(*node);
            let w = scale * real::<T>(*weight);
            total += w * (f(mid + dx) + f(mid - dx));
        }
    }
    total
}
