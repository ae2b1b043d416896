//! Iteration and sample budgets, the contraction rate under partial
//! asynchronism, and an empirical check of the per-update concentration
//! guarantee.
//!
//! The budget formulas are evaluated in 256-bit binary floating point before
//! taking the ceiling, so results near an integer are not misrounded.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use rand::Rng;
use thiserror::Error;

use crate::mdp::{ActionId, GenerativeModel, StateId, TabularMdp, ValueVector};

type Big = FBig<HalfEven, 2>;

const PRECISION: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("gamma {0} is outside (0, 1)")]
    Gamma(f64),
    #[error("epsilon {epsilon} is outside (0, 1/(1-gamma)) for gamma {gamma}")]
    Epsilon { epsilon: f64, gamma: f64 },
    #[error("delta {0} is outside (0, 1)")]
    Delta(f64),
    #[error("asynchronism bounds must be at least 1, got b1={b1}, b2={b2}")]
    Bounds { b1: u64, b2: u64 },
    #[error("iteration budget must be at least 1")]
    Iterations,
    #[error("budget does not fit in 64 bits")]
    Overflow,
}

/// Partial asynchronism constants: every coordinate is updated at least once
/// in any window of `b1` iterations, and values read are less than `b2`
/// iterations stale. `b1 = b2 = 1` is synchronous iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AsynchronismBound {
    pub b1: u64,
    pub b2: u64,
}

impl AsynchronismBound {
    pub const SYNCHRONOUS: Self = Self { b1: 1, b2: 1 };

    pub fn new(b1: u64, b2: u64) -> Result<Self, TheoryError> {
        if b1 == 0 || b2 == 0 {
            return Err(TheoryError::Bounds { b1, b2 });
        }
        Ok(Self { b1, b2 })
    }

    /// `b1 + b2 − 1`, the window length in the contraction rate.
    pub fn window(&self) -> u64 {
        self.b1 + self.b2 - 1
    }
}

fn big(x: f64) -> Big {
    Big::try_from(x)
        .expect("finite inputs")
        .with_precision(PRECISION)
        .value()
}

fn big_u64(x: u64) -> Big {
    Big::from(x).with_precision(PRECISION).value()
}

fn ceil_u64(x: &Big) -> Result<u64, TheoryError> {
    let c = x.ceil().to_int().value();
    u64::try_from(c).map_err(|_| TheoryError::Overflow)
}

fn check_gamma(gamma: f64) -> Result<(), TheoryError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(TheoryError::Gamma(gamma))
    }
}

fn check_epsilon(epsilon: f64, gamma: f64) -> Result<(), TheoryError> {
    check_gamma(gamma)?;
    if epsilon > 0.0 && epsilon * (1.0 - gamma) < 1.0 {
        Ok(())
    } else {
        Err(TheoryError::Epsilon { epsilon, gamma })
    }
}

/// `L = ⌈2 B1 + (B1 + B2 − 1)/(1 − γ) · ln(2 / ((1 − γ) ε))⌉`.
pub fn iteration_bound(
    epsilon: f64,
    gamma: f64,
    bounds: AsynchronismBound,
) -> Result<u64, TheoryError> {
    check_epsilon(epsilon, gamma)?;
    AsynchronismBound::new(bounds.b1, bounds.b2)?;
    let one_minus = big_u64(1) - big(gamma);
    let arg = big_u64(2) / (one_minus.clone() * big(epsilon));
    let value = big_u64(2) * big_u64(bounds.b1)
        + big_u64(bounds.window()) / one_minus * arg.ln();
    ceil_u64(&value)
}

/// `K = ⌈8 / ((1 − γ)⁴ ε²) · ln(4 L / δ)⌉`.
pub fn sample_bound(
    epsilon: f64,
    gamma: f64,
    delta: f64,
    iterations: u64,
) -> Result<u64, TheoryError> {
    check_epsilon(epsilon, gamma)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TheoryError::Delta(delta));
    }
    if iterations == 0 {
        return Err(TheoryError::Iterations);
    }
    let one_minus = big_u64(1) - big(gamma);
    let sq = one_minus.clone() * one_minus;
    let e = big(epsilon);
    let scale = big_u64(8) / (sq.clone() * sq * e.clone() * e);
    let value = scale * (big_u64(4) * big_u64(iterations) / big(delta)).ln();
    ceil_u64(&value)
}

/// `(L, K)` for the given accuracy, confidence and asynchronism.
pub fn theorem_budgets(
    epsilon: f64,
    gamma: f64,
    delta: f64,
    bounds: AsynchronismBound,
) -> Result<(u64, u64), TheoryError> {
    let l = iteration_bound(epsilon, gamma, bounds)?;
    let k = sample_bound(epsilon, gamma, delta, l)?;
    Ok((l, k))
}

/// `ρ = γ^{1/(B1 + B2 − 1)}`.
pub fn contraction_rate(gamma: f64, bounds: AsynchronismBound) -> Result<f64, TheoryError> {
    check_gamma(gamma)?;
    AsynchronismBound::new(bounds.b1, bounds.b2)?;
    let rho = (big(gamma).ln() / big_u64(bounds.window())).exp();
    Ok(rho.to_f64().value())
}

/// Fraction of `trials` in which the `k`-sample estimate of
/// `r̄_i^a + γ p_i^a ⊤ v̂` at a uniformly chosen pair from `pairs` misses the
/// exact value (computed from `mdp`) by more than `(1 − γ) ε / 4`.
#[allow(clippy::too_many_arguments)]
pub fn hoeffding_trial_check<G, R>(
    gm: &G,
    mdp: &TabularMdp,
    v_hat: &ValueVector,
    pairs: &[(StateId, ActionId)],
    k: u64,
    epsilon: f64,
    gamma: f64,
    trials: usize,
    rng: &mut R,
) -> f64
where
    G: GenerativeModel,
    R: Rng + ?Sized,
{
    if trials == 0 || pairs.is_empty() {
        return 0.0;
    }
    let threshold = (1.0 - gamma) * epsilon / 4.0;
    let exact: Vec<f64> = pairs
        .iter()
        .map(|&(i, a)| mdp.expected_reward(i, a) + gamma * mdp.expected_value(i, a, &v_hat.0))
        .collect();
    let mut failures = 0usize;
    for _ in 0..trials {
        let p = rng.gen_range(0..pairs.len());
        let (i, a) = pairs[p];
        let m = gm.sample_means(i, a, k, &v_hat.0, rng);
        if (m.reward + gamma * m.value - exact[p]).abs() > threshold {
            failures += 1;
        }
    }
    failures as f64 / trials as f64
}
