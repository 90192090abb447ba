// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Built-in qubit models wiring measurements, signal rules, feedback
//! channels, and lattices into ready-to-run simulations.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{pauli, CMatrix};
use crate::quantum::{ChannelFamily, DensityMatrix, Instrument, KrausSet, QuantumChannel};
use crate::scalar::{real, Real};
use crate::signal::{
    markovian_embed_history, markovian_embed_momentum, AxisSpec, MomentumParams, NonMarkovianRule,
    SignalLattice, SignalPoint, UpdateRule,
};
use crate::tolerances::Tolerances;

/// Which signal-processing rule a model runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleChoice<T> {
    /// Memoryless: the update sees only the instantaneous signal.
    Markovian,
    /// Previous increment mixed in with weight `beta`.
    Momentum { beta: T },
    /// Full dependence on `memory` past values via the history embedding.
    History { memory: usize },
}

/// A complete, ready-to-run simulation setup.
#[derive(Clone)]
pub struct Model<T: Real> {
    pub name: String,
    pub instrument: Instrument<T>,
    pub lattice: SignalLattice<T>,
    pub rho0: DensityMatrix<T>,
    pub y0: SignalPoint<T>,
    pub n_steps: u64,
}

impl<T: Real> Model<T> {
    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }
}

/// Unbiased counting model: each round flips a fair coin regardless of the
/// state's bias history, and the signal counts the ones.
///
/// The measurement operators are `|+⟩⟨0|` and `|-⟩⟨1|`. Their POVM is the
/// projective σz measurement, so first-round statistics are the σz
/// populations; re-preparing in the conjugate basis then makes every later
/// round a fair coin. From the maximally mixed state the signal after n
/// rounds is exactly Binomial(n, 1/2). Feedback channels are identity.
///
/// ```
/// use qfr_core::models::qubit_counting;
/// use qfr_core::trajectory::enumerate_paths;
///
/// let m = qubit_counting::<f64>(2)?;
/// let exact = enumerate_paths(&m.rho0, &m.y0, &m.instrument, &m.lattice, 2, 100)?;
/// let dist = exact.signal_distribution();
/// assert!((dist[&1] - 0.5).abs() < 1e-12); // P(one head in two flips)
/// # Ok::<(), qfr_core::Error>(())
/// ```
pub fn qubit_counting<T: Real>(n_steps: u64) -> Result<Model<T>> {
    let tol = Tolerances::default();
    let half_sqrt = real::<T>(0.5).sqrt();
    let zero = Complex::new(T::zero(), T::zero());
    let plus = Complex::new(half_sqrt, T::zero());
    let minus = Complex::new(-half_sqrt, T::zero());
    // |+⟩⟨0| and |-⟩⟨1|.
    let k0 = CMatrix::from_rows(&[&[plus, zero], &[plus, zero]])?;
    let k1 = CMatrix::from_rows(&[&[zero, plus], &[zero, minus]])?;
    let kraus = KrausSet::new(vec![k0, k1], &tol)?;

    let rule = UpdateRule::new(1, |_, x, y: &SignalPoint<T>| {
        SignalPoint::scalar(y.component(0) + T::from_usize(x).expect("outcome fits scalar"))
    });
    let channels =
        ChannelFamily::parametric(CMatrix::zeros(2), vec![CMatrix::zeros(2)], T::one(), &tol)?;
    let lattice = SignalLattice::new(vec![AxisSpec {
        min: T::zero(),
        max: T::from_u64(n_steps.max(1)).expect("step count fits scalar"),
        step: T::one(),
    }])?;

    Ok(Model {
        name: "qubit_counting".into(),
        instrument: Instrument::new(kraus, channels, rule)?,
        lattice,
        rho0: DensityMatrix::maximally_mixed(2),
        y0: SignalPoint::scalar(T::zero()),
        n_steps,
    })
}

/// Parameters of the Gaussian-measurement feedback model.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFeedback<T> {
    /// Measurement strength; larger values distinguish the σz poles harder.
    pub lambda: T,
    /// Number of discrete outcome bins.
    pub n_bins: usize,
    /// Feedback drive strength: the channel rotates by `exp(-i Ω s σy δt)`.
    pub omega: T,
    /// Outcome bin range, symmetric by default.
    pub bin_range: (T, T),
    /// Tracking gain of the signal rule: the drive is `gain · (x - s)`.
    pub gain: T,
    pub rule: RuleChoice<T>,
    pub dt: T,
    pub n_steps: u64,
    /// Grid step of the signal axis.
    pub signal_step: T,
}

impl<T: Real> Default for GaussianFeedback<T> {
    fn default() -> Self {
        Self {
            lambda: real(0.5),
            n_bins: 5,
            omega: real(0.4),
            bin_range: (real(-3.0), real(3.0)),
            gain: real(0.5),
            rule: RuleChoice::Markovian,
            dt: real(0.2),
            n_steps: 10,
            signal_step: real(0.1),
        }
    }
}

/// Maximum tolerable asymmetry of the renormalized bin completeness.
const BIN_DEFICIT_LIMIT: f64 = 1e-6;

/// Gaussian-measurement Kraus operators on a discrete symmetric bin grid.
///
/// Raw operators are `K_x ∝ exp(-λ(σz - x)²/4)`; a single scale factor
/// renormalizes the family so that `ΣK†K = 1`. The residual deficit is the
/// asymmetry between the two σz poles, which vanishes for a symmetric grid
/// wide enough to cover both; grids that fail that are rejected with a
/// suggested range.
pub fn gaussian_kraus<T: Real>(
    lambda: T,
    n_bins: usize,
    bin_range: (T, T),
    tol: &Tolerances<T>,
) -> Result<(KrausSet<T>, Vec<T>)> {
    if lambda <= T::zero() || !lambda.is_finite() {
        return Err(Error::BadModelParameter {
            reason: format!("lambda must be positive, got {lambda}"),
        });
    }
    if n_bins < 2 {
        return Err(Error::BadModelParameter {
            reason: format!("need at least 2 outcome bins, got {n_bins}"),
        });
    }
    let (lo, hi) = bin_range;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::BadModelParameter {
            reason: "bin range must be finite with hi > lo".into(),
        });
    }

    // Bin centers; mirrored construction keeps symmetric ranges exactly
    // symmetric in floating point.
    let n = n_bins;
    let width = hi - lo;
    let denom = T::from_usize(n - 1).expect("bin count fits scalar");
    let mut centers: Vec<T> = vec![T::zero(); n];
    for j in 0..n / 2 {
        let c = lo + width * T::from_usize(j).expect("bin index fits scalar") / denom;
        centers[j] = c;
        centers[n - 1 - j] = lo + hi - c;
    }
    if n % 2 == 1 {
        centers[n / 2] = (lo + hi) * real(0.5);
    }

    let quarter = lambda * real(0.25);
    let mut upper_sum = T::zero();
    let mut lower_sum = T::zero();
    let raw: Vec<(T, T)> = centers
        .iter()
        .map(|&x| {
            let up = (-(quarter) * (T::one() - x) * (T::one() - x)).exp();
            let dn = (-(quarter) * (T::one() + x) * (T::one() + x)).exp();
            upper_sum += up * up;
            lower_sum += dn * dn;
            (up, dn)
        })
        .collect();

    let biggest = upper_sum.max(lower_sum);
    let deficit = (upper_sum - lower_sum).abs() / biggest;
    if deficit > real(BIN_DEFICIT_LIMIT) {
        let spread = real::<T>(3.0) / lambda.sqrt();
        let pole = T::one() + spread;
        return Err(Error::BinGridTooNarrow {
            deficit: deficit.to_f64().unwrap_or(f64::NAN),
            suggested_lo: (-pole).to_f64().unwrap_or(f64::NAN),
            suggested_hi: pole.to_f64().unwrap_or(f64::NAN),
        });
    }

    let scale = T::one() / biggest.sqrt();
    let ops: Vec<CMatrix<T>> = raw
        .iter()
        .map(|&(up, dn)| CMatrix::diag_re(&[up * scale, dn * scale]))
        .collect();
    Ok((KrausSet::new(ops, tol)?, centers))
}

/// Qubit under repeated Gaussian σz measurement with σy-rotation feedback
/// proportional to the processed signal.
pub fn qubit_gaussian_feedback<T: Real>(config: GaussianFeedback<T>) -> Result<Model<T>> {
    let tol = Tolerances::default();
    if config.gain < T::zero() || config.gain > T::one() {
        return Err(Error::BadModelParameter {
            reason: format!("gain must lie in [0, 1], got {}", config.gain),
        });
    }
    let (kraus, centers) = gaussian_kraus(config.lambda, config.n_bins, config.bin_range, &tol)?;
    let values = centers.clone();
    let gain = config.gain;

    let (lo, hi) = config.bin_range;
    let s_axis = AxisSpec {
        min: lo,
        max: hi,
        step: config.signal_step,
    };
    // Increments are bounded by gain · (range width), so the momentum axes
    // cover that interval.
    let m_bound = gain * (hi - lo);
    let m_axis = AxisSpec {
        min: -m_bound,
        max: m_bound,
        step: config.signal_step * real(2.0),
    };

    let (rule, lattice_axes): (UpdateRule<T>, Vec<AxisSpec<T>>) = match config.rule {
        RuleChoice::Markovian => {
            let vals = values.clone();
            let rule = UpdateRule::new(1, move |_, x, y: &SignalPoint<T>| {
                let s = y.component(0);
                SignalPoint::scalar(s + gain * (vals[x] - s))
            });
            (rule, vec![s_axis])
        }
        RuleChoice::Momentum { beta } => {
            let vals = values.clone();
            let params = MomentumParams::discrete(beta)?;
            let rule = markovian_embed_momentum(move |_, x, s| gain * (vals[x] - s), params);
            (rule, vec![s_axis, m_axis])
        }
        RuleChoice::History { memory } => {
            let vals = values.clone();
            let inner = NonMarkovianRule::new(memory, move |_, x, history: &[T]| {
                let len = T::from_usize(history.len()).expect("history length fits scalar");
                let mean: T = history.iter().copied().sum::<T>() / len;
                history[0] + gain * (vals[x] - mean)
            });
            let rule = markovian_embed_history(&inner);
            let mut axes = vec![s_axis];
            axes.extend(std::iter::repeat_n(m_axis, memory));
            (rule, axes)
        }
    };

    let lattice = SignalLattice::new(lattice_axes)?;
    let dim = rule.dim();
    let mut couplings = vec![CMatrix::zeros(2); dim];
    couplings[0] = pauli::y::<T>().scaled_re(config.omega);
    let channels = ChannelFamily::parametric(CMatrix::zeros(2), couplings, config.dt, &tol)?;

    let y0 = SignalPoint::new(vec![T::zero(); dim]);
    Ok(Model {
        name: "qubit_gaussian_feedback".into(),
        instrument: Instrument::new(kraus, channels, rule)?,
        lattice,
        rho0: DensityMatrix::maximally_mixed(2),
        y0,
        n_steps: config.n_steps,
    })
}

/// The counting model with and without momentum, differing only in the
/// signal rule; at `beta = 0` the two produce identical dynamics.
pub fn momentum_vs_markov_pair<T: Real>(beta: T, n_steps: u64) -> Result<(Model<T>, Model<T>)> {
    let markov = qubit_counting::<T>(n_steps)?;

    let params = MomentumParams::discrete(beta)?;
    let rule = markovian_embed_momentum(
        |_, x, _| T::from_usize(x).expect("outcome fits scalar"),
        params,
    );
    let max_s = T::from_u64(n_steps.max(1)).expect("step count fits scalar");
    let lattice = SignalLattice::new(vec![
        AxisSpec {
            min: T::zero(),
            max: max_s,
            step: real(0.05),
        },
        AxisSpec {
            min: T::zero(),
            max: T::one(),
            step: real(0.01),
        },
    ])?;
    let tol = Tolerances::default();
    let channels = ChannelFamily::parametric(
        CMatrix::zeros(2),
        vec![CMatrix::zeros(2), CMatrix::zeros(2)],
        T::one(),
        &tol,
    )?;
    let momentum = Model {
        name: "qubit_counting_momentum".into(),
        instrument: Instrument::new(markov.instrument.kraus().clone(), channels, rule)?,
        lattice,
        rho0: DensityMatrix::maximally_mixed(2),
        y0: SignalPoint::new(vec![T::zero(), T::zero()]),
        n_steps,
    };
    Ok((markov, momentum))
}

/// Convenience: a single unitary channel `exp(-i H δt)` as a table entry
/// for every listed lattice index.
pub fn constant_unitary_table<T: Real>(
    h: &CMatrix<T>,
    dt: T,
    indices: impl IntoIterator<Item = usize>,
    tol: &Tolerances<T>,
) -> Result<ChannelFamily<T>> {
    let generator = h.scaled(Complex::new(T::zero(), -dt));
    let u = crate::linalg::matrix_exponential(&generator)?;
    let ch = QuantumChannel::unitary(u, tol)?;
    let map: std::collections::BTreeMap<usize, QuantumChannel<T>> =
        indices.into_iter().map(|i| (i, ch.clone())).collect();
    Ok(ChannelFamily::table(map))
}
