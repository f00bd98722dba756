//! Model-free learning agents behind a single act/observe interface.
//!
//! Three learners are provided:
//!
//! - [`DirectedAgent`]: delayed Q-learning with E-value exploration bonuses
//!   and premature (interval-estimation) update attempts.
//! - [`DelayedQAgent`]: plain delayed Q-learning with optimistic
//!   initialization and fixed-size update windows.
//! - [`EpsGreedyAgent`]: one-step Q-learning with ε-greedy action selection.
//!
//! Agents are single-owner: a run loop drives exactly one agent, calling
//! [`Agent::act`] for the current state and [`Agent::observe`] with the
//! executed transition. All randomness (exploration and tie-breaking) comes
//! from the caller's stream, so a run is a pure function of its seed.

mod delayed;
mod directed;
mod eps_greedy;

pub use delayed::DelayedQAgent;
pub use directed::{DirectedAgent, InvariantCounts};
pub use eps_greedy::EpsGreedyAgent;

use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("state index {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action index {action} out of range for {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("corrupted E-value {e_value} at (s={state}, a={action}); must be below 1")]
    CorruptEValue {
        state: usize,
        action: usize,
        e_value: f64,
    },
    #[error("scripted policy has {got} entries, expected {expected}")]
    ScriptLength { expected: usize, got: usize },
}

/// What happened inside one [`Agent::observe`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepReport {
    /// An update was attempted (for delayed-style agents: the update
    /// criterion was evaluated against a fresh sample).
    pub attempted: bool,
    /// The attempt committed new table values.
    pub succeeded: bool,
}

/// Common act/observe interface over all learners.
pub trait Agent {
    fn num_states(&self) -> usize;

    fn num_actions(&self) -> usize;

    /// Selects the next action for `state`, drawing any exploration or
    /// tie-breaking randomness from `rng`.
    fn act(&mut self, state: usize, rng: &mut dyn RngCore) -> Result<usize, AgentError>;

    /// Feeds back the executed transition `(state, action, reward, next_state)`.
    fn observe(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
    ) -> Result<StepReport, AgentError>;

    /// Current Q-value estimate.
    fn q_value(&self, state: usize, action: usize) -> f64;

    /// The value the agent acts greedily on: `Q + bonus` for the directed
    /// agent, plain `Q` otherwise.
    fn acting_value(&self, state: usize, action: usize) -> f64 {
        self.q_value(state, action)
    }

    /// Inline invariant-audit results; zero for agents without an audit.
    fn invariant_counts(&self) -> InvariantCounts {
        InvariantCounts::default()
    }
}

/// How greedy selections resolve exactly tied values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Keep the lowest-index maximizer (argmax semantics). Under a fully
    /// tied optimistic initialization this gives the agents no free
    /// random-walk exploration, so what they discover is attributable to
    /// their value and bonus dynamics.
    #[default]
    FirstIndex,
    /// Uniformly random among the maximizers.
    Uniform,
}

/// Index of the maximal entry under the given tie policy.
///
/// The uniform policy uses reservoir sampling over the running maximum, so
/// no allocation and a draw only when a tie is encountered. Comparisons are
/// exact, which makes a freshly initialized table a full tie.
pub(crate) fn argmax_tie_break(
    values: impl Iterator<Item = f64>,
    tie_break: TieBreak,
    rng: &mut dyn RngCore,
) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut chosen = 0;
    let mut ties = 0u32;
    for (i, v) in values.enumerate() {
        if v > best {
            best = v;
            chosen = i;
            ties = 1;
        } else if v == best && tie_break == TieBreak::Uniform {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                chosen = i;
            }
        }
    }
    chosen
}

pub(crate) fn check_state(state: usize, num_states: usize) -> Result<(), AgentError> {
    if state >= num_states {
        Err(AgentError::StateOutOfRange { state, num_states })
    } else {
        Ok(())
    }
}

pub(crate) fn check_action(action: usize, num_actions: usize) -> Result<(), AgentError> {
    if action >= num_actions {
        Err(AgentError::ActionOutOfRange {
            action,
            num_actions,
        })
    } else {
        Ok(())
    }
}

/// Fixed stationary policy: one action per state, no learning.
///
/// Used to pin down harness statistics against exact chain expectations.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    actions: Vec<usize>,
    num_actions: usize,
}

impl ScriptedAgent {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self, AgentError> {
        for &a in &actions {
            check_action(a, num_actions)?;
        }
        Ok(Self {
            actions,
            num_actions,
        })
    }
}

impl Agent for ScriptedAgent {
    fn num_states(&self) -> usize {
        self.actions.len()
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn act(&mut self, state: usize, _rng: &mut dyn RngCore) -> Result<usize, AgentError> {
        check_state(state, self.actions.len())?;
        Ok(self.actions[state])
    }

    fn observe(
        &mut self,
        state: usize,
        action: usize,
        _reward: f64,
        next_state: usize,
    ) -> Result<StepReport, AgentError> {
        check_state(state, self.actions.len())?;
        check_action(action, self.num_actions)?;
        check_state(next_state, self.actions.len())?;
        Ok(StepReport::default())
    }

    fn q_value(&self, _state: usize, _action: usize) -> f64 {
        0.0
    }
}
