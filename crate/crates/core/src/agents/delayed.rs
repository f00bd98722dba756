//! Delayed Q-learning with optimistic initialization.
//!
//! The agent acts greedily on Q, accumulates exactly `m` samples per
//! attempted update, and commits `Q(s,a) <- mean(r_i + gamma * max_a'
//! Q(s_i', a')) + epsilon1` only when the commit lowers `Q(s,a)` by at
//! least `2 * epsilon1`. LEARN bookkeeping mirrors the directed agent's:
//! window boundaries stamp `b(s,a)`, and a pair stops learning after a
//! failed window that saw no global value change.

use super::{argmax_tie_break, check_action, check_state, Agent, AgentError, StepReport, TieBreak};
use rand::RngCore;

#[derive(Debug, Clone)]
pub struct DelayedQAgent {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    m: usize,
    epsilon1: f64,
    /// Q-value estimates, init `1 / (1 - gamma)`.
    q: Vec<f64>,
    /// Per-pair reward + backup accumulator.
    u: Vec<f64>,
    n: Vec<u32>,
    b: Vec<u64>,
    learn: Vec<bool>,
    t_star: u64,
    t: u64,
    tie_break: TieBreak,
}

impl DelayedQAgent {
    pub fn new(num_states: usize, num_actions: usize, gamma: f64, m: usize, epsilon1: f64) -> Self {
        assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1)");
        assert!(m >= 1, "m must be positive");
        assert!(epsilon1 > 0.0, "epsilon1 must be positive");
        let pairs = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            gamma,
            m,
            epsilon1,
            q: vec![1.0 / (1.0 - gamma); pairs],
            u: vec![0.0; pairs],
            n: vec![0; pairs],
            b: vec![0; pairs],
            learn: vec![true; pairs],
            t_star: 0,
            t: 0,
            tie_break: TieBreak::default(),
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    #[inline]
    fn max_q(&self, state: usize) -> f64 {
        self.q[state * self.num_actions..(state + 1) * self.num_actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Agent for DelayedQAgent {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn act(&mut self, state: usize, rng: &mut dyn RngCore) -> Result<usize, AgentError> {
        check_state(state, self.num_states)?;
        let base = state * self.num_actions;
        Ok(argmax_tie_break(
            self.q[base..base + self.num_actions].iter().copied(),
            self.tie_break,
            rng,
        ))
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
        let mut report = StepReport::default();
        if !self.learn[idx] {
            return Ok(report);
        }
        self.n[idx] += 1;
        self.u[idx] += reward + self.gamma * self.max_q(next_state);
        if self.n[idx] as usize == self.m {
            report.attempted = true;
            let value = self.u[idx] / self.m as f64 + self.epsilon1;
            if self.q[idx] - value >= 2.0 * self.epsilon1 {
                self.q[idx] = value;
                self.t_star = self.t;
                report.succeeded = true;
            }
            self.n[idx] = 0;
            self.u[idx] = 0.0;
            self.b[idx] = self.t;
            if !report.succeeded && self.b[idx] > self.t_star {
                self.learn[idx] = false;
            }
        }
        Ok(report)
    }

    fn q_value(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }
}
