//! One-step Q-learning with ε-greedy exploration.

use super::{argmax_tie_break, check_action, check_state, Agent, AgentError, StepReport, TieBreak};
use rand::{Rng, RngCore};

#[derive(Debug, Clone)]
pub struct EpsGreedyAgent {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    /// Fixed learning rate in (0, 1].
    alpha: f64,
    /// Probability of a uniform random action.
    epsilon: f64,
    /// Q-value estimates, init 0.
    q: Vec<f64>,
    tie_break: TieBreak,
}

impl EpsGreedyAgent {
    pub fn new(num_states: usize, num_actions: usize, gamma: f64, alpha: f64, epsilon: f64) -> Self {
        assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1)");
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        assert!((0.0..=1.0).contains(&epsilon), "epsilon must lie in [0, 1]");
        Self {
            num_states,
            num_actions,
            gamma,
            alpha,
            epsilon,
            q: vec![0.0; num_states * num_actions],
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

impl Agent for EpsGreedyAgent {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn act(&mut self, state: usize, rng: &mut dyn RngCore) -> Result<usize, AgentError> {
        check_state(state, self.num_states)?;
        if rng.gen::<f64>() < self.epsilon {
            return Ok(rng.gen_range(0..self.num_actions));
        }
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
        let idx = state * self.num_actions + action;
        let target = reward + self.gamma * self.max_q(next_state);
        self.q[idx] += self.alpha * (target - self.q[idx]);
        Ok(StepReport {
            attempted: true,
            succeeded: true,
        })
    }

    fn q_value(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }
}
