//! Tabular reinforcement learning with directed exploration.
//!
//! The crate provides four layers:
//!
//! - [`mdp`]: exact finite discounted MDPs (dense transition/reward tensors),
//!   including the slippery chain environments, plus sampling and JSON I/O.
//! - [`params`]: the closed-form hyperparameter derivations (batch sizes,
//!   exploration-bonus scale, per-pair update budgets) used by the learning
//!   agents, from one audited source.
//! - [`agents`]: three model-free learners behind a single act/observe
//!   interface — directed delayed Q-learning with E-value exploration
//!   bonuses, plain delayed Q-learning, and one-step Q-learning with
//!   ε-greedy exploration.
//! - [`solver`] and [`harness`]: a value-iteration/policy-evaluation oracle
//!   and a seeded, parallel experiment runner with aggregation and
//!   diagnostics (mistake counts, optimism audits, known-set escapes).

pub mod agents;
pub mod harness;
pub mod mdp;
pub mod params;
pub mod solver;

pub use agents::{Agent, AgentError, StepReport};
pub use harness::{ExperimentConfig, RunRecord, SummaryTable};
pub use mdp::{make_chain, ChainSpec, FiniteMdp, MdpError};
pub use params::{derive_params, exploration_bonus, HyperParams, ParamsError};
pub use solver::{evaluate_policy, value_iteration, SolveResult, SolverError};
