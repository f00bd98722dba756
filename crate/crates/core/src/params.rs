//! Closed-form hyperparameter derivations for the directed agent.
//!
//! Everything the learner's analysis pins down — the per-update decrease
//! `epsilon1`, the log base `eta`, the bonus scale `lambda`, the Monte-Carlo
//! slack `rho`, the batch sizes `m1`/`m2`, and the per-pair update budget
//! `kappa` — is computed here from the primitive inputs so that theoretical
//! and practical configurations come from one audited source.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// E-values at or below this threshold are treated as fully explored: the
/// exploration bonus of a clamped value is zero (the limit as E -> 0).
pub const E_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("epsilon must be positive, got {0}")]
    EpsilonOutOfRange(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("gamma must lie in [0, 1), got {0}")]
    GammaOutOfRange(f64),
    #[error("gamma_e must lie in (0, 1), got {0}")]
    GammaEOutOfRange(f64),
    #[error("derived epsilon1 = {0} is not below 0.5; choose a smaller epsilon")]
    Epsilon1TooLarge(f64),
    #[error("epsilon1 must lie in (0, 0.5), got {0}")]
    Epsilon1OutOfRange(f64),
    #[error("m must be a positive batch size")]
    ZeroBatchSize,
    #[error("state and action counts must be positive")]
    EmptySpace,
    #[error("r_max must be nonnegative, got {0}")]
    NegativeRmax(f64),
    #[error("lambda = {lambda} exceeds the admissible bound {bound}")]
    LambdaTooLarge { lambda: f64, bound: f64 },
    #[error("rho = {rho} exceeds the admissible bound {bound}")]
    RhoTooLarge { rho: f64, bound: f64 },
    #[error("eta must lie in (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error("E-value {0} is not below 1; the E-table is corrupted")]
    EValueOutOfRange(f64),
}

/// Every free and derived parameter of the directed agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Target accuracy of the learned policy.
    pub epsilon: f64,
    /// Allowed failure probability.
    pub delta: f64,
    /// MDP discount factor.
    pub gamma: f64,
    /// Discount factor of the E-value propagation.
    pub gamma_e: f64,
    /// Minimum decrease per successful update; `epsilon * (1 - gamma) / 4`.
    pub epsilon1: f64,
    /// Samples per attempted-update window.
    pub m: usize,
    /// Monte-Carlo slack coefficient; `epsilon1 * sqrt(m)`.
    pub rho: f64,
    /// Exploration-bonus scale; `epsilon1 * sqrt(log_eta(epsilon1))`.
    pub lambda: f64,
    /// Base of the bonus log transform; `1 - epsilon1`.
    pub eta: f64,
    /// Successful-update budget per pair; `1 / ((1 - gamma) * epsilon1)`.
    pub kappa: f64,
    /// Value upper bound; `r_max / (1 - gamma)`.
    pub v_max: f64,
    /// Batch size that controls the Q-value Hoeffding bound.
    pub m1: usize,
    /// Batch size that controls the E-value Hoeffding bound.
    pub m2: usize,
}

fn check_common(gamma: f64, gamma_e: f64, r_max: f64) -> Result<(), ParamsError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(ParamsError::GammaOutOfRange(gamma));
    }
    if !(gamma_e > 0.0 && gamma_e < 1.0) {
        return Err(ParamsError::GammaEOutOfRange(gamma_e));
    }
    if r_max < 0.0 {
        return Err(ParamsError::NegativeRmax(r_max));
    }
    Ok(())
}

/// `log_eta(x)` computed as a natural-log ratio.
#[inline]
fn log_base(eta: f64, x: f64) -> f64 {
    x.ln() / eta.ln()
}

fn lambda_bound(epsilon1: f64, eta: f64) -> f64 {
    epsilon1 * log_base(eta, epsilon1).sqrt()
}

/// Derives the full parameter set from the primitive inputs.
///
/// The accuracy split is `epsilon1 = epsilon * (1 - gamma) / 4` with
/// `eta = 1 - epsilon1`, `lambda = epsilon1 * sqrt(log_eta(epsilon1))` and
/// `rho = epsilon1 * sqrt(m)`. The batch size is `m = max(m1, m2)`, which
/// always equals `m1` because `(1 + gamma * v_max)^2 > gamma_e^2`.
pub fn derive_params(
    epsilon: f64,
    delta: f64,
    gamma: f64,
    gamma_e: f64,
    num_states: usize,
    num_actions: usize,
    r_max: f64,
) -> Result<HyperParams, ParamsError> {
    if !(epsilon > 0.0) {
        return Err(ParamsError::EpsilonOutOfRange(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ParamsError::DeltaOutOfRange(delta));
    }
    check_common(gamma, gamma_e, r_max)?;
    if num_states == 0 || num_actions == 0 {
        return Err(ParamsError::EmptySpace);
    }
    let epsilon1 = epsilon * (1.0 - gamma) / 4.0;
    if epsilon1 >= 0.5 {
        return Err(ParamsError::Epsilon1TooLarge(epsilon1));
    }
    let kappa = 1.0 / ((1.0 - gamma) * epsilon1);
    let v_max = r_max / (1.0 - gamma);
    let sa = (num_states * num_actions) as f64;
    let log_term = (6.0 * sa * (1.0 + sa * kappa) / delta).ln();
    let m1 = ((1.0 + gamma * v_max).powi(2) / (2.0 * epsilon1 * epsilon1) * log_term).ceil();
    let m2 = (gamma_e * gamma_e / (2.0 * epsilon1 * epsilon1) * log_term).ceil();
    let m = m1.max(m2);
    let eta = 1.0 - epsilon1;
    let lambda = lambda_bound(epsilon1, eta);
    let rho = epsilon1 * m.sqrt();
    Ok(HyperParams {
        epsilon,
        delta,
        gamma,
        gamma_e,
        epsilon1,
        m: m as usize,
        rho,
        lambda,
        eta,
        kappa,
        v_max,
        m1: m1 as usize,
        m2: m2 as usize,
    })
}

impl HyperParams {
    /// Builds a parameter set with `epsilon1` and `m` chosen directly, as
    /// used for empirical runs where the theoretical batch sizes would be
    /// far too conservative.
    ///
    /// `epsilon` is back-filled as `4 * epsilon1 / (1 - gamma)` (the inverse
    /// of the derivation) and `delta` is a nominal 0.05; neither influences
    /// the agent. `m1` and `m2` are both set to `m`.
    pub fn practical(
        gamma: f64,
        gamma_e: f64,
        epsilon1: f64,
        m: usize,
        r_max: f64,
    ) -> Result<Self, ParamsError> {
        check_common(gamma, gamma_e, r_max)?;
        if !(epsilon1 > 0.0 && epsilon1 < 0.5) {
            return Err(ParamsError::Epsilon1OutOfRange(epsilon1));
        }
        if m == 0 {
            return Err(ParamsError::ZeroBatchSize);
        }
        let eta = 1.0 - epsilon1;
        Ok(Self {
            epsilon: 4.0 * epsilon1 / (1.0 - gamma),
            delta: 0.05,
            gamma,
            gamma_e,
            epsilon1,
            m,
            rho: epsilon1 * (m as f64).sqrt(),
            lambda: lambda_bound(epsilon1, eta),
            eta,
            kappa: 1.0 / ((1.0 - gamma) * epsilon1),
            v_max: r_max / (1.0 - gamma),
            m1: m,
            m2: m,
        })
    }

    /// Checks the admissibility constraints that the analysis assumes:
    /// `eta, gamma_e in (0,1)`, `epsilon1 in (0, 0.5)`,
    /// `lambda <= epsilon1 * sqrt(log_eta(epsilon1))` and
    /// `rho <= epsilon1 * sqrt(m)`.
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ParamsError::EtaOutOfRange(self.eta));
        }
        if !(self.gamma_e > 0.0 && self.gamma_e < 1.0) {
            return Err(ParamsError::GammaEOutOfRange(self.gamma_e));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 0.5) {
            return Err(ParamsError::Epsilon1OutOfRange(self.epsilon1));
        }
        if self.m == 0 {
            return Err(ParamsError::ZeroBatchSize);
        }
        let lb = lambda_bound(self.epsilon1, self.eta);
        if self.lambda > lb {
            return Err(ParamsError::LambdaTooLarge {
                lambda: self.lambda,
                bound: lb,
            });
        }
        let rb = self.epsilon1 * (self.m as f64).sqrt();
        if self.rho > rb {
            return Err(ParamsError::RhoTooLarge {
                rho: self.rho,
                bound: rb,
            });
        }
        Ok(())
    }

    /// Exploration bonus for a stored E-value, using this parameter set.
    pub fn bonus(&self, e_value: f64) -> Result<f64, ParamsError> {
        exploration_bonus(e_value, self.lambda, self.eta)
    }

    /// Bonus for E-values already guaranteed to lie below 1 (table-internal
    /// use; skips the corruption check in release builds).
    #[inline]
    pub(crate) fn bonus_unchecked(&self, e_value: f64) -> f64 {
        debug_assert!(e_value < 1.0, "E-value {e_value} out of range");
        if e_value < E_UNDERFLOW {
            0.0
        } else {
            self.lambda / log_base(self.eta, e_value).sqrt()
        }
    }
}

/// The exploration bonus `lambda / sqrt(log_eta(e_value))`.
///
/// E-values at or below [`E_UNDERFLOW`] yield bonus 0 (consistent with the
/// limit); values at or above 1 are rejected because they can only arise
/// from a corrupted E-table.
pub fn exploration_bonus(e_value: f64, lambda: f64, eta: f64) -> Result<f64, ParamsError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(ParamsError::EtaOutOfRange(eta));
    }
    if e_value >= 1.0 {
        return Err(ParamsError::EValueOutOfRange(e_value));
    }
    if e_value < E_UNDERFLOW {
        return Ok(0.0);
    }
    Ok(lambda / log_base(eta, e_value).sqrt())
}

/// Worst-case update and escape counts implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateBounds {
    /// Successful updates across all pairs: `S * A * ceil(kappa)`.
    pub max_successful_updates: u64,
    /// Attempted updates across all pairs: `S * A * m * (1 + S * A * ceil(kappa))`.
    pub max_attempted_updates: u64,
    /// Timesteps that can experience a pair outside the known set:
    /// `2 * m * S * A * ceil(kappa)`.
    pub max_escape_steps: u64,
}

/// Evaluates the three counting bounds for an `S`-state, `A`-action MDP.
pub fn known_set_bound(params: &HyperParams, num_states: usize, num_actions: usize) -> UpdateBounds {
    let sa = (num_states as u64).saturating_mul(num_actions as u64);
    let kappa = params.kappa.ceil() as u64;
    let m = params.m as u64;
    let max_successful_updates = sa.saturating_mul(kappa);
    let max_attempted_updates = sa
        .saturating_mul(m)
        .saturating_mul(1u64.saturating_add(max_successful_updates));
    let max_escape_steps = 2u64.saturating_mul(m).saturating_mul(max_successful_updates);
    UpdateBounds {
        max_successful_updates,
        max_attempted_updates,
        max_escape_steps,
    }
}

/// The smallest `rho` for which the optimism argument's concentration step
/// goes through: `(1 + gamma * v_max) * sqrt(ln(3*S*A*m*(1+S*A*kappa)/delta) / 2)`.
///
/// The derivation's actual choice `rho = epsilon1 * sqrt(m)` can fall below
/// this; [`rho_meets_optimism_bound`] reports whether it does for a given
/// configuration.
pub fn rho_optimism_lower_bound(params: &HyperParams, num_states: usize, num_actions: usize) -> f64 {
    let sa = (num_states * num_actions) as f64;
    let inner = 3.0 * sa * params.m as f64 * (1.0 + sa * params.kappa) / params.delta;
    (1.0 + params.gamma * params.v_max) * (0.5 * inner.ln()).sqrt()
}

pub fn rho_meets_optimism_bound(
    params: &HyperParams,
    num_states: usize,
    num_actions: usize,
) -> bool {
    params.rho >= rho_optimism_lower_bound(params, num_states, num_actions)
}
