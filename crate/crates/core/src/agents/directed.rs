//! Directed delayed Q-learning.
//!
//! The agent keeps optimistic Q-value estimates plus an E-value table that
//! generalizes visit counters: every pair starts at `1 - epsilon1` and is
//! driven toward zero as the pair (and its successors) gain experience.
//! Action selection is greedy over `Q'(s,a) = Q(s,a) + lambda /
//! sqrt(log_eta E(s,a))`. Updates are delayed: surrogate estimates
//! accumulate per pair and commit as soon as the commit would lower `Q'` by
//! at least `epsilon1`, or are discarded after `m` samples. LEARN flags shut
//! off accumulation for pairs whose window expired with no global value
//! change since it began.

use super::{check_action, check_state, Agent, AgentError, StepReport, TieBreak};
use crate::params::HyperParams;
use rand::RngCore;

/// Maximum number of violation descriptions retained verbatim.
const MAX_VIOLATION_DETAILS: usize = 8;

/// Results of the always-on inline invariant audit.
///
/// Each counter tallies commits that broke the corresponding property.
/// `details` keeps the first few occurrences for debugging.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantCounts {
    /// Commit failed to lower `Q'(s,a)` by at least `epsilon1`.
    pub q_prime_decrease: u64,
    /// Committed E-value did not strictly decrease.
    pub e_monotonicity: u64,
    /// Committed E-value left `(0, 1 - epsilon1]`.
    pub e_range: u64,
    /// Committed `Q'(s,a)` exceeded `v_max + sqrt(1 - epsilon1)`.
    pub q_prime_bound: u64,
    /// A pair exceeded its successful-update budget
    /// `ceil((1/(1-gamma) + lambda) / epsilon1)`.
    pub success_budget: u64,
    pub details: Vec<String>,
}

impl InvariantCounts {
    pub fn total(&self) -> u64 {
        self.q_prime_decrease + self.e_monotonicity + self.e_range + self.q_prime_bound
            + self.success_budget
    }

    fn record(&mut self, counter: fn(&mut Self) -> &mut u64, detail: String) {
        *counter(self) += 1;
        if self.details.len() < MAX_VIOLATION_DETAILS {
            self.details.push(detail);
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectedAgent {
    num_states: usize,
    num_actions: usize,
    params: HyperParams,
    /// Q-value estimates, init `1 / (1 - gamma)`.
    q: Vec<f64>,
    /// E-value estimates, init `1 - epsilon1`.
    e: Vec<f64>,
    /// Surrogate (within-window) Q estimate, init 0.
    q_surrogate: Vec<f64>,
    /// Surrogate E estimate, init 0.
    e_surrogate: Vec<f64>,
    /// Inner counter per pair, in `[0, m]`.
    n: Vec<u32>,
    /// Timestep at which the current attempted-update window began.
    b: Vec<u64>,
    /// LEARN flags.
    learn: Vec<bool>,
    /// Time of the most recent successful update (any pair).
    t_star: u64,
    /// Global timestep, incremented per observed transition.
    t: u64,
    /// Successful updates per pair, for the budget audit.
    successes: Vec<u64>,
    /// `ceil((1/(1-gamma) + lambda) / epsilon1)`.
    success_budget: u64,
    /// `v_max + sqrt(1 - epsilon1)`.
    q_prime_cap: f64,
    tie_break: TieBreak,
    invariants: InvariantCounts,
}

impl DirectedAgent {
    /// Builds a fresh agent. `params` must satisfy [`HyperParams::validate`].
    pub fn new(
        num_states: usize,
        num_actions: usize,
        params: HyperParams,
    ) -> Result<Self, crate::params::ParamsError> {
        params.validate()?;
        let pairs = num_states * num_actions;
        let optimistic = 1.0 / (1.0 - params.gamma);
        let e_init = 1.0 - params.epsilon1;
        let success_budget = ((optimistic + params.lambda) / params.epsilon1).ceil() as u64;
        let q_prime_cap = params.v_max + (1.0 - params.epsilon1).sqrt();
        Ok(Self {
            num_states,
            num_actions,
            q: vec![optimistic; pairs],
            e: vec![e_init; pairs],
            q_surrogate: vec![0.0; pairs],
            e_surrogate: vec![0.0; pairs],
            n: vec![0; pairs],
            b: vec![0; pairs],
            learn: vec![true; pairs],
            t_star: 0,
            t: 0,
            successes: vec![0; pairs],
            success_budget,
            q_prime_cap,
            tie_break: TieBreak::default(),
            invariants: InvariantCounts::default(),
            params,
        })
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    /// Global timestep (number of observed transitions).
    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn e_value(&self, state: usize, action: usize) -> f64 {
        self.e[state * self.num_actions + action]
    }

    /// `Q'(s,a) = Q(s,a) + bonus(E(s,a))`.
    pub fn q_prime(&self, state: usize, action: usize) -> f64 {
        let idx = state * self.num_actions + action;
        self.q[idx] + self.params.bonus_unchecked(self.e[idx])
    }

    /// Flat `S*A` Q table (for the known-set diagnostic).
    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    /// Flat `S*A` E table (for the known-set diagnostic).
    pub fn e_table(&self) -> &[f64] {
        &self.e
    }

    #[inline]
    fn max_q(&self, state: usize) -> f64 {
        self.q[state * self.num_actions..(state + 1) * self.num_actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    fn max_e(&self, state: usize) -> f64 {
        self.e[state * self.num_actions..(state + 1) * self.num_actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn audit_commit(&mut self, state: usize, action: usize, q_prime_old: f64, old_e: f64) {
        let idx = state * self.num_actions + action;
        let q_prime_new = self.q_prime(state, action);
        let drop = q_prime_old - q_prime_new;
        if !(drop >= self.params.epsilon1) {
            self.invariants.record(
                |c| &mut c.q_prime_decrease,
                format!(
                    "t={}: commit at (s={state}, a={action}) lowered q' by {drop} < epsilon1",
                    self.t
                ),
            );
        }
        let e_new = self.e[idx];
        if !(e_new < old_e) {
            self.invariants.record(
                |c| &mut c.e_monotonicity,
                format!(
                    "t={}: committed E at (s={state}, a={action}) moved {old_e} -> {e_new}",
                    self.t
                ),
            );
        }
        if !(e_new > 0.0 && e_new <= 1.0 - self.params.epsilon1) {
            self.invariants.record(
                |c| &mut c.e_range,
                format!(
                    "t={}: committed E {e_new} at (s={state}, a={action}) outside (0, 1-epsilon1]",
                    self.t
                ),
            );
        }
        if !(q_prime_new <= self.q_prime_cap) {
            self.invariants.record(
                |c| &mut c.q_prime_bound,
                format!(
                    "t={}: committed q' {q_prime_new} at (s={state}, a={action}) above cap {}",
                    self.t, self.q_prime_cap
                ),
            );
        }
        if self.successes[idx] > self.success_budget {
            self.invariants.record(
                |c| &mut c.success_budget,
                format!(
                    "t={}: pair (s={state}, a={action}) reached {} successful updates (budget {})",
                    self.t, self.successes[idx], self.success_budget
                ),
            );
        }
    }
}

impl Agent for DirectedAgent {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn act(&mut self, state: usize, rng: &mut dyn RngCore) -> Result<usize, AgentError> {
        check_state(state, self.num_states)?;
        let base = state * self.num_actions;
        // A corrupted E-value (>= 1) must surface, never be clamped upward.
        let mut best = f64::NEG_INFINITY;
        let mut chosen = 0;
        let mut ties = 0u32;
        for a in 0..self.num_actions {
            let e = self.e[base + a];
            if e >= 1.0 {
                return Err(AgentError::CorruptEValue {
                    state,
                    action: a,
                    e_value: e,
                });
            }
            let v = self.q[base + a] + self.params.bonus_unchecked(e);
            if v > best {
                best = v;
                chosen = a;
                ties = 1;
            } else if v == best && self.tie_break == TieBreak::Uniform {
                ties += 1;
                if rand::Rng::gen_range(rng, 0..ties) == 0 {
                    chosen = a;
                }
            }
        }
        Ok(chosen)
    }

    fn observe(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
    ) -> Result<StepReport, AgentError> {
        check_state(state, self.num_states)?;
        check_action(action, self.num_actions)?;
        check_state(next_state, self.num_states)?;
        self.t += 1;
        let idx = state * self.num_actions + action;
        if self.b[idx] <= self.t_star {
            self.learn[idx] = true;
        }
        if !self.learn[idx] {
            return Ok(StepReport::default());
        }
        self.n[idx] += 1;
        let alpha = 1.0 / f64::from(self.n[idx]);
        self.q_surrogate[idx] = (1.0 - alpha) * self.q_surrogate[idx]
            + alpha * (reward + self.params.gamma * self.max_q(next_state));
        self.e_surrogate[idx] = (1.0 - alpha) * self.e_surrogate[idx]
            + alpha * (self.params.gamma_e * self.max_e(next_state));

        let q_prime_old = self.q[idx] + self.params.bonus_unchecked(self.e[idx]);
        let committed_q = self.q_surrogate[idx] + self.params.rho / f64::from(self.n[idx]).sqrt();
        let candidate = committed_q + self.params.bonus_unchecked(self.e_surrogate[idx]);
        let mut report = StepReport {
            attempted: true,
            succeeded: false,
        };
        if q_prime_old - candidate >= self.params.epsilon1 {
            let old_e = self.e[idx];
            self.q[idx] = committed_q;
            self.e[idx] = self.e_surrogate[idx];
            self.t_star = self.t;
            self.n[idx] = 0;
            self.q_surrogate[idx] = 0.0;
            self.e_surrogate[idx] = 0.0;
            self.b[idx] = self.t;
            self.successes[idx] += 1;
            report.succeeded = true;
            self.audit_commit(state, action, q_prime_old, old_e);
        } else if self.n[idx] as usize == self.params.m {
            self.n[idx] = 0;
            self.q_surrogate[idx] = 0.0;
            self.e_surrogate[idx] = 0.0;
            self.b[idx] = self.t;
            if self.b[idx] > self.t_star {
                self.learn[idx] = false;
            }
        }
        Ok(report)
    }

    fn q_value(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }

    fn acting_value(&self, state: usize, action: usize) -> f64 {
        self.q_prime(state, action)
    }

    fn invariant_counts(&self) -> InvariantCounts {
        self.invariants.clone()
    }
}
