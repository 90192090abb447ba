// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Quantum states, generalized measurements, signal-parameterized feedback
//! channels, and the combined measurement-plus-feedback instrument.
//!
//! All maps here are pure functions of immutable inputs; values are safe to
//! share and send across threads.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, CMatrix};
use crate::scalar::Real;
use crate::signal::{SignalLattice, SignalPoint, UpdateRule};
use crate::tolerances::{probability_floor, Tolerances};

/// Unit-trace Hermitian PSD matrix: the conditional quantum state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    mat: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, positivity, and unit trace on construction.
    pub fn new(mat: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        if !mat.is_finite() {
            return Err(Error::NonFinite);
        }
        let herm = mat.hermiticity_error();
        if herm > tol.hermiticity {
            return Err(Error::NotHermitian {
                deviation: herm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let tr = mat.trace_re();
        if (tr - T::one()).abs() > tol.unit_trace {
            return Err(Error::BadTrace {
                trace: tr.to_f64().unwrap_or(f64::NAN),
            });
        }
        let min = mat.min_eigval()?;
        if min < -tol.positivity {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { mat })
    }

    /// `|ψ⟩⟨ψ|` from (not necessarily normalized) amplitudes.
    pub fn pure(amplitudes: &[Complex<T>]) -> Self {
        let norm_sqr: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let mat = CMatrix::from_fn(amplitudes.len(), |i, j| {
            amplitudes[i] * amplitudes[j].conj() / Complex::new(norm_sqr, T::zero())
        });
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = T::one() / T::from_usize(dim).expect("dim fits the scalar");
        Self {
            mat: CMatrix::identity(dim).scaled_re(w),
        }
    }

    /// Diagonal (classical) state from probabilities; they must sum to 1.
    pub fn classical(probs: &[T], tol: &Tolerances<T>) -> Result<Self> {
        Self::new(CMatrix::diag_re(probs), tol)
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }
}

/// Subnormalized state: Hermitian PSD with trace in `[0, 1]`.
///
/// These carry the unnormalized branches `K ρ K†` and the per-signal
/// components of a resolved state; the trace is the branch weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedState<T> {
    mat: CMatrix<T>,
}

impl<T: Real> WeightedState<T> {
    pub fn new(mat: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        let ws = Self { mat };
        ws.validate(tol)?;
        Ok(ws)
    }

    /// Skips validation; used on the hot path where inputs are outputs of
    /// completely positive maps and stay valid by construction.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix<T>) -> Self {
        Self { mat }
    }

    pub fn validate(&self, tol: &Tolerances<T>) -> Result<()> {
        if !self.mat.is_finite() {
            return Err(Error::NonFinite);
        }
        let herm = self.mat.hermiticity_error();
        if herm > tol.hermiticity {
            return Err(Error::NotHermitian {
                deviation: herm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let tr = self.mat.trace_re();
        if tr < -tol.positivity || tr > T::one() + tol.unit_trace {
            return Err(Error::BadTrace {
                trace: tr.to_f64().unwrap_or(f64::NAN),
            });
        }
        let min = self.mat.min_eigval()?;
        if min < -tol.positivity {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn weight(&self) -> T {
        self.mat.trace_re()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }

    /// Normalized state, or `None` when the weight is below the
    /// normalizability floor and division would amplify noise.
    pub fn normalized(&self, tol: &Tolerances<T>) -> Option<DensityMatrix<T>> {
        let w = self.weight();
        if w < probability_floor() {
            return None;
        }
        DensityMatrix::new(self.mat.scaled_re(T::one() / w), tol).ok()
    }
}

impl<T: Real> From<DensityMatrix<T>> for WeightedState<T> {
    fn from(rho: DensityMatrix<T>) -> Self {
        Self {
            mat: rho.into_matrix(),
        }
    }
}

/// A complete set of measurement operators `{K_x}` with `ΣK†K = 1`.
#[derive(Debug, Clone)]
pub struct KrausSet<T> {
    dim: usize,
    operators: Vec<CMatrix<T>>,
}

impl<T: Real> KrausSet<T> {
    pub fn new(operators: Vec<CMatrix<T>>, tol: &Tolerances<T>) -> Result<Self> {
        let dim = check_operator_family(&operators)?;
        let deficit = completeness_deficit(&operators);
        if deficit > tol.completeness {
            return Err(Error::IncompleteKraus {
                deficit: deficit.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { dim, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operator(&self, x: usize) -> &CMatrix<T> {
        &self.operators[x]
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.operators
    }
}

/// A CPTP map given by its Kraus decomposition.
#[derive(Debug, Clone)]
pub struct QuantumChannel<T> {
    dim: usize,
    kraus_ops: Vec<CMatrix<T>>,
}

impl<T: Real> QuantumChannel<T> {
    pub fn new(kraus_ops: Vec<CMatrix<T>>, tol: &Tolerances<T>) -> Result<Self> {
        let dim = check_operator_family(&kraus_ops)?;
        let deficit = completeness_deficit(&kraus_ops);
        if deficit > tol.completeness {
            return Err(Error::IncompleteKraus {
                deficit: deficit.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { dim, kraus_ops })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kraus_ops: vec![CMatrix::identity(dim)],
        }
    }

    /// Single-Kraus channel from a unitary, checked against `U†U = 1`.
    pub fn unitary(u: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        let gram = u.adjoint().matmul(&u);
        let dev = gram.max_abs_diff(&CMatrix::identity(u.dim()));
        if dev > tol.completeness {
            return Err(Error::NotUnitary {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            dim: u.dim(),
            kraus_ops: vec![u],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus_ops(&self) -> &[CMatrix<T>] {
        &self.kraus_ops
    }
}

fn check_operator_family<T: Real>(ops: &[CMatrix<T>]) -> Result<usize> {
    let first = ops.first().ok_or(Error::EmptyKrausSet)?;
    let dim = first.dim();
    for op in ops {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: op.dim(),
            });
        }
        if !op.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    Ok(dim)
}

/// Max `|ΣK†K - 1|` entry over a family of operators.
pub fn completeness_deficit<T: Real>(ops: &[CMatrix<T>]) -> T {
    if ops.is_empty() {
        return T::infinity();
    }
    let dim = ops[0].dim();
    let mut sum = CMatrix::zeros(dim);
    for op in ops {
        sum += &op.adjoint().matmul(op);
    }
    sum.max_abs_diff(&CMatrix::identity(dim))
}

/// Feedback channels indexed by the signal value.
///
/// Table mode stores one channel per lattice index. Parametric mode builds
/// the unitary `exp(-i (H₀ + Σ_k y_k H_k) δt)` on demand; every `H` must be
/// Hermitian and `couplings` must have one entry per signal component.
#[derive(Debug, Clone)]
pub enum ChannelFamily<T> {
    Table(std::collections::BTreeMap<usize, QuantumChannel<T>>),
    Parametric {
        h0: CMatrix<T>,
        couplings: Vec<CMatrix<T>>,
        dt: T,
    },
}

impl<T: Real> ChannelFamily<T> {
    pub fn table(entries: std::collections::BTreeMap<usize, QuantumChannel<T>>) -> Self {
        Self::Table(entries)
    }

    pub fn parametric(
        h0: CMatrix<T>,
        couplings: Vec<CMatrix<T>>,
        dt: T,
        tol: &Tolerances<T>,
    ) -> Result<Self> {
        for h in std::iter::once(&h0).chain(couplings.iter()) {
            if h.dim() != h0.dim() {
                return Err(Error::DimensionMismatch {
                    expected: h0.dim(),
                    got: h.dim(),
                });
            }
            let dev = h.hermiticity_error();
            if dev > tol.hermiticity {
                return Err(Error::NotHermitian {
                    deviation: dev.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self::Parametric { h0, couplings, dt })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Table(map) => map.values().next().map(|c| c.dim()),
            Self::Parametric { h0, .. } => Some(h0.dim()),
        }
    }
}

/// Looks up (table mode) or builds (parametric mode) the feedback channel at
/// a signal value. `index` addresses the table; `point` feeds the parametric
/// Hamiltonian. Engines always pass the lattice-projected pair.
pub fn channel_at<T: Real>(
    family: &ChannelFamily<T>,
    index: usize,
    point: &SignalPoint<T>,
) -> Result<QuantumChannel<T>> {
    match family {
        ChannelFamily::Table(map) => map
            .get(&index)
            .cloned()
            .ok_or(Error::MissingChannel { index }),
        ChannelFamily::Parametric { h0, couplings, dt } => {
            if couplings.len() != point.dim() {
                return Err(Error::CouplingMismatch {
                    couplings: couplings.len(),
                    dim: point.dim(),
                });
            }
            let mut h = h0.clone();
            for (k, hk) in couplings.iter().enumerate() {
                h += &hk.scaled_re(point.component(k));
            }
            let generator = h.scaled(Complex::new(T::zero(), -*dt));
            let u = matrix_exponential(&generator)?;
            Ok(QuantumChannel {
                dim: u.dim(),
                kraus_ops: vec![u],
            })
        }
    }
}

/// Born probabilities `P(x) = tr[K_x ρ K_x†]` over the outcome alphabet.
///
/// Entries are clamped to `[0, 1]`; the sum must stay within the
/// completeness tolerance of 1.
pub fn born_probabilities<T: Real>(
    kraus: &KrausSet<T>,
    rho: &DensityMatrix<T>,
    tol: &Tolerances<T>,
) -> Result<Vec<T>> {
    if kraus.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: kraus.dim(),
            got: rho.dim(),
        });
    }
    let mut probs = Vec::with_capacity(kraus.len());
    let mut sum = T::zero();
    for op in kraus.operators() {
        let p = op.sandwich(rho.matrix()).trace_re();
        if !p.is_finite() {
            return Err(Error::NonFinite);
        }
        sum += p;
        probs.push(p.max(T::zero()).min(T::one()));
    }
    let drift = (sum - T::one()).abs();
    if drift > tol.completeness {
        return Err(Error::ProbabilityDrift {
            sum: sum.to_f64().unwrap_or(f64::NAN),
            drift: drift.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(probs)
}

/// The unnormalized post-measurement branch `K ρ K†` and its trace.
///
/// When the returned probability is below [`probability_floor`] the branch
/// is unnormalizable and must not be divided by its trace;
/// [`WeightedState::normalized`] enforces that.
pub fn post_measurement_state<T: Real>(
    k: &CMatrix<T>,
    rho: &DensityMatrix<T>,
) -> Result<(WeightedState<T>, T)> {
    if k.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: rho.dim(),
        });
    }
    let branch = k.sandwich(rho.matrix());
    if !branch.is_finite() {
        return Err(Error::NonFinite);
    }
    let p = branch.trace_re();
    Ok((WeightedState::from_matrix_unchecked(branch), p))
}

/// Applies a CPTP channel to a subnormalized state: `Σ_k A_k ρ A_k†`.
pub fn apply_channel<T: Real>(
    ch: &QuantumChannel<T>,
    rho: &WeightedState<T>,
) -> Result<WeightedState<T>> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim(),
            got: rho.dim(),
        });
    }
    let mut out = CMatrix::zeros(ch.dim());
    for op in ch.kraus_ops() {
        out += &op.sandwich(rho.matrix());
    }
    Ok(WeightedState::from_matrix_unchecked(out))
}

/// One measurement-plus-feedback round: Kraus outcomes, the signal update
/// rule, and the signal-dependent feedback channel family.
#[derive(Clone)]
pub struct Instrument<T: Real> {
    kraus: KrausSet<T>,
    channels: ChannelFamily<T>,
    rule: UpdateRule<T>,
}

impl<T: Real> Instrument<T> {
    pub fn new(
        kraus: KrausSet<T>,
        channels: ChannelFamily<T>,
        rule: UpdateRule<T>,
    ) -> Result<Self> {
        if let Some(chdim) = channels.dim() {
            if chdim != kraus.dim() {
                return Err(Error::DimensionMismatch {
                    expected: kraus.dim(),
                    got: chdim,
                });
            }
        }
        if let ChannelFamily::Parametric { couplings, .. } = &channels {
            if couplings.len() != rule.dim() {
                return Err(Error::CouplingMismatch {
                    couplings: couplings.len(),
                    dim: rule.dim(),
                });
            }
        }
        Ok(Self {
            kraus,
            channels,
            rule,
        })
    }

    pub fn kraus(&self) -> &KrausSet<T> {
        &self.kraus
    }

    pub fn channels(&self) -> &ChannelFamily<T> {
        &self.channels
    }

    pub fn rule(&self) -> &UpdateRule<T> {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.kraus.dim()
    }

    pub fn n_outcomes(&self) -> usize {
        self.kraus.len()
    }
}

/// Result of applying one instrument branch.
#[derive(Debug, Clone)]
pub struct InstrumentStep<T> {
    /// Unnormalized output `L(y')[K_x ρ K_x†]`; its trace is the branch weight.
    pub state: WeightedState<T>,
    /// Lattice index of the updated, projected signal.
    pub index: usize,
    /// The projected signal point itself.
    pub point: SignalPoint<T>,
    /// Whether projection clamped the raw update to the lattice bounds.
    pub clipped: bool,
}

/// Applies outcome branch `x` of the instrument at signal `y`:
/// the raw update `f_step(x, y)` is projected onto the lattice, and the
/// feedback channel evaluated at the projected point acts on `K_x ρ K_x†`.
///
/// `step` is the index of the round being produced (the rule may depend on
/// it). Summed over all outcomes the output traces reproduce the input
/// trace: the feedback channel is trace preserving on every branch.
pub fn instrument_apply<T: Real>(
    inst: &Instrument<T>,
    lattice: &SignalLattice<T>,
    step: u64,
    x: usize,
    y: &SignalPoint<T>,
    rho: &WeightedState<T>,
) -> Result<InstrumentStep<T>> {
    let branch = inst.kraus.operator(x).sandwich(rho.matrix());
    let raw = inst.rule.eval(step, x, y);
    let (index, clipped) = lattice.project(&raw)?;
    let point = lattice.point(index);
    let ch = channel_at(&inst.channels, index, &point)?;
    let mut out = CMatrix::zeros(branch.dim());
    for op in ch.kraus_ops() {
        out += &op.sandwich(&branch);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(InstrumentStep {
        state: WeightedState::from_matrix_unchecked(out),
        index,
        point,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use crate::signal::{AxisSpec, SignalLattice, SignalPoint, UpdateRule};
    use num_complex::Complex64 as C64;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn projector(basis: usize) -> CMatrix<f64> {
        CMatrix::from_fn(2, |i, j| {
            if i == basis && j == basis {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    fn projective_kraus() -> KrausSet<f64> {
        KrausSet::new(vec![projector(0), projector(1)], &tol()).unwrap()
    }

    #[test]
    fn density_matrix_rejects_bad_trace() {
        let m = CMatrix::diag_re(&[0.45, 0.45]);
        assert!(matches!(
            DensityMatrix::new(m, &tol()),
            Err(Error::BadTrace { .. })
        ));
    }

    #[test]
    fn density_matrix_rejects_negative_eigenvalue() {
        let m = CMatrix::diag_re(&[1.2, -0.2]);
        assert!(matches!(
            DensityMatrix::new(m, &tol()),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn born_single_identity_outcome() {
        let kraus = KrausSet::new(vec![CMatrix::identity(2)], &tol()).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let p = born_probabilities(&kraus, &rho, &tol()).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn born_projective_on_mixed() {
        let rho = DensityMatrix::maximally_mixed(2);
        let p = born_probabilities(&projective_kraus(), &rho, &tol()).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn born_projective_matches_direct_traces() {
        // Independent oracle: P(x) = tr[P_x ρ P_x†] computed entry by entry.
        let rho = DensityMatrix::classical(&[0.3, 0.7], &tol()).unwrap();
        let p = born_probabilities(&projective_kraus(), &rho, &tol()).unwrap();
        let oracle: Vec<f64> = (0..2)
            .map(|x| {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            let kx = projector(x);
                            acc +=
                                (kx.get(i, j) * rho.matrix().get(j, k) * kx.adjoint().get(k, i)).re;
                        }
                    }
                }
                acc
            })
            .collect();
        assert!((p[0] - oracle[0]).abs() < 1e-14);
        assert!((p[1] - oracle[1]).abs() < 1e-14);
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn born_rejects_dimension_mismatch() {
        let kraus = KrausSet::new(vec![CMatrix::identity(3)], &tol()).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            born_probabilities(&kraus, &rho, &tol()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn post_measurement_identity_returns_input() {
        let rho = DensityMatrix::classical(&[0.3, 0.7], &tol()).unwrap();
        let (w, p) = post_measurement_state(&CMatrix::identity(2), &rho).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        assert!(w.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn post_measurement_projector_on_mixed() {
        let rho = DensityMatrix::maximally_mixed(2);
        let (w, p) = post_measurement_state(&projector(0), &rho).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        assert!(w.matrix().max_abs_diff(&CMatrix::diag_re(&[0.5, 0.0])) < 1e-14);
    }

    #[test]
    fn post_measurement_matches_naive_multiply() {
        // Gaussian-style Kraus on |+⟩⟨+| checked against an index-loop
        // triple product written independently of CMatrix::matmul.
        let k = CMatrix::from_rows(&[&[c(0.8, 0.0), c(0.1, 0.05)], &[c(0.0, -0.1), c(0.55, 0.0)]])
            .unwrap();
        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let (w, _) = post_measurement_state(&k, &plus).unwrap();
        let mut oracle = CMatrix::zeros(2);
        for i in 0..2 {
            for l in 0..2 {
                let mut acc = c(0.0, 0.0);
                for j in 0..2 {
                    for m in 0..2 {
                        acc += k.get(i, j) * plus.matrix().get(j, m) * k.get(l, m).conj();
                    }
                }
                oracle.set(i, l, acc);
            }
        }
        assert!(w.matrix().max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn gaussian_measurement_branch_matches_naive_multiply() {
        // Same oracle as above, applied to an operator from the shipped
        // Gaussian measurement family.
        let (kraus, _) = crate::models::gaussian_kraus::<f64>(0.5, 5, (-3.0, 3.0), &tol()).unwrap();
        let k = kraus.operator(1);
        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let (w, p) = post_measurement_state(k, &plus).unwrap();
        let mut oracle = CMatrix::zeros(2);
        for i in 0..2 {
            for l in 0..2 {
                let mut acc = c(0.0, 0.0);
                for j in 0..2 {
                    for m in 0..2 {
                        acc += k.get(i, j) * plus.matrix().get(j, m) * k.get(l, m).conj();
                    }
                }
                oracle.set(i, l, acc);
            }
        }
        assert!(w.matrix().max_abs_diff(&oracle) < 1e-15);
        assert!((p - oracle.trace_re()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_operators_are_rejected() {
        let mut k = CMatrix::identity(2);
        k.set(0, 0, c(f64::NAN, 0.0));
        assert!(matches!(
            KrausSet::new(vec![k], &tol()),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn unnormalizable_branch_is_flagged() {
        let rho = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let (w, p) = post_measurement_state(&projector(1), &rho).unwrap();
        assert!(p.abs() < 1e-14);
        assert!(w.normalized(&tol()).is_none());
    }

    #[test]
    fn identity_channel_is_a_fixed_point() {
        let rho: WeightedState<f64> = DensityMatrix::maximally_mixed(2).into();
        let out = apply_channel(&QuantumChannel::identity(2), &rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn unitary_channel_preserves_trace() {
        let u = matrix_exponential(&pauli::y::<f64>().scaled(c(0.0, -0.77))).unwrap();
        let ch = QuantumChannel::unitary(u, &tol()).unwrap();
        let rho: WeightedState<f64> = DensityMatrix::classical(&[0.25, 0.75], &tol())
            .unwrap()
            .into();
        let out = apply_channel(&ch, &rho).unwrap();
        assert!((out.weight() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn depolarizing_channel_matches_pauli_algebra() {
        // Kraus {√(1-p) 1, √(p/3) X, √(p/3) Y, √(p/3) Z} on |0⟩⟨0| gives
        // (1 - 2p/3)|0⟩⟨0| + (2p/3)|1⟩⟨1|.
        let p = 0.3f64;
        let ops = vec![
            CMatrix::identity(2).scaled_re((1.0 - p).sqrt()),
            pauli::x::<f64>().scaled_re((p / 3.0).sqrt()),
            pauli::y::<f64>().scaled_re((p / 3.0).sqrt()),
            pauli::z::<f64>().scaled_re((p / 3.0).sqrt()),
        ];
        let ch = QuantumChannel::new(ops, &tol()).unwrap();
        let rho: WeightedState<f64> = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).into();
        let out = apply_channel(&ch, &rho).unwrap();
        let expected = CMatrix::diag_re(&[1.0 - 2.0 * p / 3.0, 2.0 * p / 3.0]);
        assert!(out.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn channel_family_zero_hamiltonians_give_identity() {
        let fam =
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 0.3, &tol())
                .unwrap();
        let ch = channel_at(&fam, 0, &SignalPoint::new(vec![1.5])).unwrap();
        assert_eq!(ch.kraus_ops().len(), 1);
        assert!(ch.kraus_ops()[0].max_abs_diff(&CMatrix::identity(2)) == 0.0);
    }

    #[test]
    fn channel_family_sigma_z_drift_matches_closed_form() {
        let omega = 0.7;
        let dt = 0.3;
        let fam = ChannelFamily::parametric(
            pauli::z::<f64>().scaled_re(omega / 2.0),
            vec![CMatrix::zeros(2)],
            dt,
            &tol(),
        )
        .unwrap();
        let ch = channel_at(&fam, 0, &SignalPoint::new(vec![0.0])).unwrap();
        let half = omega * dt / 2.0;
        let expected = CMatrix::diag(&[c(half.cos(), -half.sin()), c(half.cos(), half.sin())]);
        assert!(ch.kraus_ops()[0].max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn parametric_channels_are_unitary() {
        let fam = ChannelFamily::parametric(
            pauli::x::<f64>().scaled_re(0.4),
            vec![pauli::y::<f64>().scaled_re(1.3)],
            0.21,
            &tol(),
        )
        .unwrap();
        for s in [-2.0, -0.3, 0.0, 1.7] {
            let ch = channel_at(&fam, 0, &SignalPoint::new(vec![s])).unwrap();
            let u = &ch.kraus_ops()[0];
            let dev = u.adjoint().matmul(u).max_abs_diff(&CMatrix::identity(2));
            assert!(dev < 1e-9, "s = {s}: unitarity deviation {dev}");
        }
    }

    #[test]
    fn channel_table_lookup_contract() {
        let mut map = std::collections::BTreeMap::new();
        for idx in 0..3usize {
            map.insert(idx, QuantumChannel::identity(2));
        }
        let fam = ChannelFamily::table(map);
        let y = SignalPoint::new(vec![0.0]);
        assert!(channel_at(&fam, 2, &y).is_ok());
        assert!(matches!(
            channel_at(&fam, 3, &y),
            Err(Error::MissingChannel { index: 3 })
        ));
    }

    #[test]
    fn parametric_rejects_non_hermitian_hamiltonian() {
        let mut h = CMatrix::zeros(2);
        h.set(0, 1, c(1.0, 0.0));
        assert!(matches!(
            ChannelFamily::parametric(h, vec![], 0.1, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn kraus_set_rejects_incomplete_family() {
        let ops = vec![projector(0)];
        assert!(matches!(
            KrausSet::new(ops, &tol()),
            Err(Error::IncompleteKraus { .. })
        ));
    }

    fn unit_lattice() -> SignalLattice<f64> {
        SignalLattice::new(vec![AxisSpec {
            min: 0.0,
            max: 8.0,
            step: 1.0,
        }])
        .unwrap()
    }

    fn counting_instrument() -> Instrument<f64> {
        let rule = UpdateRule::new(1, |_, x, y: &SignalPoint<f64>| {
            SignalPoint::new(vec![y.component(0) + x as f64])
        });
        Instrument::new(
            projective_kraus(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            rule,
        )
        .unwrap()
    }

    #[test]
    fn identity_instrument_is_a_fixed_point() {
        let rule = UpdateRule::new(1, |_, _, y: &SignalPoint<f64>| y.clone());
        let inst = Instrument::new(
            KrausSet::new(vec![CMatrix::identity(2)], &tol()).unwrap(),
            ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], 1.0, &tol())
                .unwrap(),
            rule,
        )
        .unwrap();
        let lat = unit_lattice();
        let rho: WeightedState<f64> = DensityMatrix::maximally_mixed(2).into();
        let y = SignalPoint::new(vec![3.0]);
        let out = instrument_apply(&inst, &lat, 1, 0, &y, &rho).unwrap();
        assert!(out.state.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        assert_eq!(out.point.component(0), 3.0);
        assert!(!out.clipped);
    }

    #[test]
    fn counting_instrument_shifts_the_lattice_index() {
        // Two-branch hand computation: P_x ρ P_x lands at y + x.
        let inst = counting_instrument();
        let lat = unit_lattice();
        let rho: WeightedState<f64> = DensityMatrix::maximally_mixed(2).into();
        let y = SignalPoint::new(vec![2.0]);

        let out0 = instrument_apply(&inst, &lat, 1, 0, &y, &rho).unwrap();
        assert_eq!(out0.index, 2);
        assert!(
            out0.state
                .matrix()
                .max_abs_diff(&CMatrix::diag_re(&[0.5, 0.0]))
                < 1e-15
        );

        let out1 = instrument_apply(&inst, &lat, 1, 1, &y, &rho).unwrap();
        assert_eq!(out1.index, 3);
        assert!(
            out1.state
                .matrix()
                .max_abs_diff(&CMatrix::diag_re(&[0.0, 0.5]))
                < 1e-15
        );
    }

    #[test]
    fn instrument_is_trace_preserving_summed_over_outcomes() {
        let inst = counting_instrument();
        let lat = unit_lattice();
        let rho: WeightedState<f64> = DensityMatrix::pure(&[c(0.6, 0.2), c(0.3, -0.7)]).into();
        let y = SignalPoint::new(vec![4.0]);
        let total: f64 = (0..inst.n_outcomes())
            .map(|x| {
                instrument_apply(&inst, &lat, 1, x, &y, &rho)
                    .unwrap()
                    .state
                    .weight()
            })
            .sum();
        assert!((total - rho.weight()).abs() < 1e-12);
    }
}
