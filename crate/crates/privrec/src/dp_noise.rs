//! Laplace and importance-weighted score privatization, plus privacy
//! budget accounting.
//!
//! The uniform mechanism adds `Laplace(0, sensitivity / epsilon)` noise to a
//! matching score. The adaptive mechanism divides the scale further by a
//! per-(user, video) importance weight: the norm of the score gradient with
//! respect to the video vector, normalized by the maximum over the
//! candidate set. Since that gradient is `sigmoid'(u . v) * u`, the weight
//! reduces to `s(1-s)` ratios and is clamped below by a configurable floor
//! so the noise scale stays bounded.
//!
//! Privatized scores are deliberately NOT clamped to [0, 1]: clamping would
//! reshape the noise distribution and break the density-ratio property that
//! makes the mechanism differentially private. Ranking consumes the raw
//! noisy values; only display scores are clamped, elsewhere.
//!
//! Budget accounting is sequential composition: each charge adds its
//! epsilon, and a charge that would exceed the budget fails without
//! changing the ledger.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedVector;
use crate::scoring::{self, InterestVector};

/// Parameters of the score-privatization mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoiseConfig")]
pub struct NoiseConfig {
    /// Sensitivity of the matching score (Δs). The score lives in (0, 1),
    /// so 1.0 is the conservative default.
    pub sensitivity: f64,
    /// Privacy budget parameter per privatized release.
    pub epsilon: f64,
    /// Lower clamp for importance weights; bounds the adaptive noise scale
    /// at `sensitivity / (epsilon * omega_floor)`.
    pub omega_floor: f64,
}

#[derive(Deserialize)]
struct RawNoiseConfig {
    sensitivity: f64,
    epsilon: f64,
    omega_floor: f64,
}

impl TryFrom<RawNoiseConfig> for NoiseConfig {
    type Error = Error;

    fn try_from(raw: RawNoiseConfig) -> Result<Self> {
        NoiseConfig::new(raw.sensitivity, raw.epsilon, raw.omega_floor)
    }
}

pub const DEFAULT_SENSITIVITY: f64 = 1.0;
pub const DEFAULT_OMEGA_FLOOR: f64 = 0.01;

impl NoiseConfig {
    pub fn new(sensitivity: f64, epsilon: f64, omega_floor: f64) -> Result<Self> {
        if !sensitivity.is_finite() || sensitivity <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sensitivity must be positive and finite, got {sensitivity}"
            )));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !omega_floor.is_finite() || omega_floor <= 0.0 || omega_floor > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "omega_floor must lie in (0, 1], got {omega_floor}"
            )));
        }
        let worst_scale = sensitivity / (epsilon * omega_floor);
        if !worst_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise scale {worst_scale} is not finite for these parameters"
            )));
        }
        Ok(NoiseConfig {
            sensitivity,
            epsilon,
            omega_floor,
        })
    }

    /// Default sensitivity (1.0) and omega floor (0.01) with the given epsilon.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        NoiseConfig::new(DEFAULT_SENSITIVITY, epsilon, DEFAULT_OMEGA_FLOOR)
    }

    /// Noise scale of the uniform mechanism.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// Total-vs-consumed privacy budget under sequential composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLedger")]
pub struct PrivacyLedger {
    budget: f64,
    consumed: f64,
}

#[derive(Deserialize)]
struct RawLedger {
    budget: f64,
    consumed: f64,
}

impl TryFrom<RawLedger> for PrivacyLedger {
    type Error = Error;

    fn try_from(raw: RawLedger) -> Result<Self> {
        if !raw.budget.is_finite() && raw.budget != f64::INFINITY {
            return Err(Error::InvalidConfig(format!(
                "ledger budget must be a number, got {}",
                raw.budget
            )));
        }
        if raw.budget < 0.0 || raw.consumed < 0.0 || raw.consumed > raw.budget {
            return Err(Error::InvalidConfig(format!(
                "ledger state invalid (budget {}, consumed {})",
                raw.budget, raw.consumed
            )));
        }
        Ok(PrivacyLedger {
            budget: raw.budget,
            consumed: raw.consumed,
        })
    }
}

impl PrivacyLedger {
    pub fn new(budget: f64) -> Result<Self> {
        if budget.is_nan() || budget < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "budget must be non-negative, got {budget}"
            )));
        }
        Ok(PrivacyLedger {
            budget,
            consumed: 0.0,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn consumed(&self) -> f64 {
        self.consumed
    }

    pub fn remaining(&self) -> f64 {
        (self.budget - self.consumed).max(0.0)
    }

    /// Atomic check-and-add: on failure the ledger is unchanged.
    pub fn charge(&mut self, epsilon: f64) -> Result<()> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::NonPositiveCharge(epsilon));
        }
        if self.consumed + epsilon > self.budget {
            return Err(Error::BudgetExhausted {
                requested: epsilon,
                remaining: self.remaining(),
                budget: self.budget,
                consumed: self.consumed,
            });
        }
        self.consumed += epsilon;
        Ok(())
    }
}

/// Inverse-CDF Laplace noise from a single uniform draw. Assumes the scale
/// was already validated; one draw is always consumed so call sequences
/// stay aligned across mechanisms sharing a stream.
fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let mut u: f64 = rng.gen();
    while u == 0.0 {
        // gen() covers [0, 1); the inverse CDF needs the open interval.
        u = rng.gen();
    }
    if scale == 0.0 {
        return 0.0;
    }
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// Draw from `Laplace(0, scale)`; a scale of zero yields exactly zero.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::InvalidScale(scale));
    }
    Ok(laplace_unchecked(scale, rng))
}

/// Uniform mechanism: `s + Laplace(0, sensitivity / epsilon)`.
pub fn privatize_score<R: Rng + ?Sized>(s: f64, config: &NoiseConfig, rng: &mut R) -> f64 {
    s + laplace_unchecked(config.scale(), rng)
}

/// Importance weight of one candidate: the norm of the score gradient with
/// respect to the video vector, normalized by the candidate-set maximum and
/// clamped below by the configured floor. Degenerate cases (zero user
/// vector, all-saturated scores) weigh 1 for every candidate.
pub fn importance_weight(
    u: &InterestVector,
    v_j: &FusedVector,
    candidates: &[FusedVector],
    config: &NoiseConfig,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let u_norm = scoring::norm(&u.values);
    let grad_norm = |v: &FusedVector| -> Result<f64> {
        let s = scoring::match_score(u, v)?;
        Ok(s * (1.0 - s) * u_norm)
    };
    let g_j = grad_norm(v_j)?;
    let mut g_max = 0.0f64;
    for v in candidates {
        g_max = g_max.max(grad_norm(v)?);
    }
    if g_max == 0.0 {
        return Ok(1.0);
    }
    Ok((g_j / g_max).min(1.0).max(config.omega_floor))
}

/// Adaptive mechanism: `s + Laplace(0, sensitivity / (epsilon * omega))`.
/// With `omega = 1` this is the uniform mechanism, draw for draw.
pub fn privatize_score_adaptive<R: Rng + ?Sized>(
    s: f64,
    omega: f64,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<f64> {
    if !(config.omega_floor..=1.0).contains(&omega) {
        return Err(Error::OmegaOutOfRange {
            omega,
            floor: config.omega_floor,
        });
    }
    Ok(s + laplace_unchecked(config.sensitivity / (config.epsilon * omega), rng))
}

/// A batch score-noising mechanism. Ranking hands over the whole candidate
/// score vector at once so adaptive weights can normalize over it.
pub trait Privatizer {
    fn apply(&mut self, scores: &[f64]) -> Result<Vec<f64>>;
}

/// Eq-3 style mechanism: the same noise scale for every score.
pub struct UniformMechanism<R: Rng> {
    config: NoiseConfig,
    rng: R,
}

impl<R: Rng> UniformMechanism<R> {
    pub fn new(config: NoiseConfig, rng: R) -> Self {
        UniformMechanism { config, rng }
    }
}

impl<R: Rng> Privatizer for UniformMechanism<R> {
    fn apply(&mut self, scores: &[f64]) -> Result<Vec<f64>> {
        Ok(scores
            .iter()
            .map(|&s| privatize_score(s, &self.config, &mut self.rng))
            .collect())
    }
}

/// Importance-weighted mechanism. Weights are computed from the batch
/// itself: `omega_i = s_i (1 - s_i) / max_k s_k (1 - s_k)`, the
/// user-vector norm cancelling in the ratio.
pub struct AdaptiveMechanism<R: Rng> {
    config: NoiseConfig,
    rng: R,
}

impl<R: Rng> AdaptiveMechanism<R> {
    pub fn new(config: NoiseConfig, rng: R) -> Self {
        AdaptiveMechanism { config, rng }
    }
}

impl<R: Rng> Privatizer for AdaptiveMechanism<R> {
    fn apply(&mut self, scores: &[f64]) -> Result<Vec<f64>> {
        let g_max = scores
            .iter()
            .map(|&s| s * (1.0 - s))
            .fold(0.0f64, f64::max);
        scores
            .iter()
            .map(|&s| {
                let omega = if g_max == 0.0 {
                    1.0
                } else {
                    (s * (1.0 - s) / g_max).min(1.0).max(self.config.omega_floor)
                };
                privatize_score_adaptive(s, omega, &self.config, &mut self.rng)
            })
            .collect()
    }
}

/// Wraps a mechanism so that every batch application charges the ledger
/// first; an exhausted budget fails the whole batch atomically.
pub struct LedgerBound<'a, P: Privatizer> {
    inner: P,
    ledger: &'a mut PrivacyLedger,
    epsilon_per_call: f64,
}

impl<'a, P: Privatizer> LedgerBound<'a, P> {
    pub fn new(inner: P, ledger: &'a mut PrivacyLedger, epsilon_per_call: f64) -> Self {
        LedgerBound {
            inner,
            ledger,
            epsilon_per_call,
        }
    }
}

impl<P: Privatizer> Privatizer for LedgerBound<'_, P> {
    fn apply(&mut self, scores: &[f64]) -> Result<Vec<f64>> {
        self.ledger.charge(self.epsilon_per_call)?;
        self.inner.apply(scores)
    }
}
