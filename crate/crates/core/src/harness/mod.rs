//! Seeded experiment execution and aggregation.
//!
//! An [`ExperimentConfig`] names an environment, a list of methods with
//! their hyperparameters, a horizon and a number of independent runs. Every
//! run's random stream is derived counter-style from `(base_seed,
//! method_index, seed_index)`, so results are independent of scheduling and
//! worker count. Optional per-step diagnostics audit the agent against the
//! exact solver: mistake counts (policy value below optimal at the visited
//! state), optimism violations, and known-set escapes.

mod csv;

pub use csv::{emit_table, parse_per_run_csv, per_run_csv, render_table, summary_csv};

use crate::agents::{
    Agent, AgentError, DelayedQAgent, DirectedAgent, EpsGreedyAgent, ScriptedAgent, TieBreak,
};
use crate::mdp::{make_chain, ChainSpec, FiniteMdp, MdpError};
use crate::params::{HyperParams, ParamsError};
use crate::solver::{
    evaluate_policy, greedy_policy, pair_bellman_gap, value_iteration, SolveResult, SolverError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

/// Tolerance used for diagnostic policy evaluations and the V*/Q* solve.
const DIAG_TOL: f64 = 1e-10;
const DIAG_MAX_ITER: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("malformed config: {0}")]
    ConfigParse(String),
    #[error("failed to read MDP file {path}: {source}")]
    MdpFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("per-run CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
}

fn config_err(key: &str, message: impl fmt::Display) -> HarnessError {
    HarnessError::Config {
        key: key.to_string(),
        message: message.to_string(),
    }
}

/// Environment source: a chain spec or a serialized MDP document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MdpSource {
    Chain(ChainSpec),
    File { path: PathBuf },
}

impl MdpSource {
    pub fn build(&self) -> Result<FiniteMdp, HarnessError> {
        match self {
            MdpSource::Chain(spec) => Ok(make_chain(spec)?),
            MdpSource::File { path } => {
                let text = fs::read_to_string(path).map_err(|source| HarnessError::MdpFile {
                    path: path.clone(),
                    source,
                })?;
                Ok(FiniteMdp::from_json(&text)?)
            }
        }
    }
}

fn default_directed_m() -> usize {
    1000
}

fn default_m() -> usize {
    10
}

fn default_epsilon1() -> f64 {
    0.01
}

fn default_alpha() -> f64 {
    0.1
}

fn default_exploration() -> f64 {
    0.1
}

/// Directed delayed Q-learning hyperparameters.
///
/// `gamma` defaults to the environment's discount. `lambda`, `rho` and
/// `eta` default to their admissible values `epsilon1 *
/// sqrt(log_eta(epsilon1))`, `epsilon1 * sqrt(m)` and `1 - epsilon1`.
/// The default window size is deliberately large (1000): the premature
/// update criterion does the committing, and a large `m` gives
/// `rho = epsilon1 * sqrt(m)` enough weight to keep single-sample slip
/// noise from triggering spurious early commits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectedSpec {
    pub gamma_e: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_directed_m")]
    pub m: usize,
    #[serde(default = "default_epsilon1")]
    pub epsilon1: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedSpec {
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_epsilon1")]
    pub epsilon1: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsGreedySpec {
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_exploration")]
    pub epsilon_greedy: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSpec {
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MethodSpec {
    Directed(DirectedSpec),
    Delayed(DelayedSpec),
    EpsGreedy(EpsGreedySpec),
    Scripted(ScriptedSpec),
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Directed(_) => "directed",
            MethodSpec::Delayed(_) => "delayed",
            MethodSpec::EpsGreedy(_) => "eps_greedy",
            MethodSpec::Scripted(_) => "scripted",
        }
    }

    pub fn gamma_e(&self) -> Option<f64> {
        match self {
            MethodSpec::Directed(spec) => Some(spec.gamma_e),
            _ => None,
        }
    }

    /// The per-update decrease threshold, where the method has one.
    fn epsilon1(&self) -> Option<f64> {
        match self {
            MethodSpec::Directed(spec) => Some(spec.epsilon1),
            MethodSpec::Delayed(spec) => Some(spec.epsilon1),
            _ => None,
        }
    }

    fn validate(&self, index: usize) -> Result<(), HarnessError> {
        let key = |field: &str| format!("methods[{index}].{field}");
        let check_gamma = |gamma: Option<f64>| -> Result<(), HarnessError> {
            if let Some(g) = gamma {
                if !(0.0..1.0).contains(&g) {
                    return Err(config_err(&key("gamma"), "must lie in [0, 1)"));
                }
            }
            Ok(())
        };
        match self {
            MethodSpec::Directed(spec) => {
                check_gamma(spec.gamma)?;
                if !(spec.gamma_e > 0.0 && spec.gamma_e < 1.0) {
                    return Err(config_err(&key("gamma_e"), "must lie in (0, 1)"));
                }
                if !(spec.epsilon1 > 0.0 && spec.epsilon1 < 0.5) {
                    return Err(config_err(&key("epsilon1"), "must lie in (0, 0.5)"));
                }
                if spec.m == 0 {
                    return Err(config_err(&key("m"), "must be at least 1"));
                }
            }
            MethodSpec::Delayed(spec) => {
                check_gamma(spec.gamma)?;
                if !(spec.epsilon1 > 0.0) {
                    return Err(config_err(&key("epsilon1"), "must be positive"));
                }
                if spec.m == 0 {
                    return Err(config_err(&key("m"), "must be at least 1"));
                }
            }
            MethodSpec::EpsGreedy(spec) => {
                check_gamma(spec.gamma)?;
                if !(spec.alpha > 0.0 && spec.alpha <= 1.0) {
                    return Err(config_err(&key("alpha"), "must lie in (0, 1]"));
                }
                if !(0.0..=1.0).contains(&spec.epsilon_greedy) {
                    return Err(config_err(&key("epsilon_greedy"), "must lie in [0, 1]"));
                }
            }
            MethodSpec::Scripted(spec) => {
                if spec.actions.is_empty() {
                    return Err(config_err(&key("actions"), "must not be empty"));
                }
            }
        }
        Ok(())
    }

    /// Builds the agent for this method against a concrete environment.
    pub fn build_agent(
        &self,
        mdp: &FiniteMdp,
        index: usize,
    ) -> Result<Box<dyn Agent>, HarnessError> {
        let s_n = mdp.num_states();
        let a_n = mdp.num_actions();
        match self {
            MethodSpec::Directed(spec) => {
                let gamma = spec.gamma.unwrap_or_else(|| mdp.discount());
                let mut params =
                    HyperParams::practical(gamma, spec.gamma_e, spec.epsilon1, spec.m, mdp.r_max())
                        .map_err(|e| config_err(&format!("methods[{index}]"), e))?;
                if let Some(lambda) = spec.lambda {
                    params.lambda = lambda;
                }
                if let Some(rho) = spec.rho {
                    params.rho = rho;
                }
                if let Some(eta) = spec.eta {
                    params.eta = eta;
                }
                let agent = DirectedAgent::new(s_n, a_n, params)
                    .map_err(|e| config_err(&format!("methods[{index}]"), e))?
                    .with_tie_break(spec.tie_break);
                Ok(Box::new(agent))
            }
            MethodSpec::Delayed(spec) => {
                let gamma = spec.gamma.unwrap_or_else(|| mdp.discount());
                Ok(Box::new(
                    DelayedQAgent::new(s_n, a_n, gamma, spec.m, spec.epsilon1)
                        .with_tie_break(spec.tie_break),
                ))
            }
            MethodSpec::EpsGreedy(spec) => {
                let gamma = spec.gamma.unwrap_or_else(|| mdp.discount());
                Ok(Box::new(
                    EpsGreedyAgent::new(s_n, a_n, gamma, spec.alpha, spec.epsilon_greedy)
                        .with_tie_break(spec.tie_break),
                ))
            }
            MethodSpec::Scripted(spec) => {
                if spec.actions.len() != s_n {
                    return Err(config_err(
                        &format!("methods[{index}].actions"),
                        format!("has {} entries, environment has {s_n} states", spec.actions.len()),
                    ));
                }
                let agent = ScriptedAgent::new(spec.actions.clone(), a_n)
                    .map_err(|e| config_err(&format!("methods[{index}].actions"), e))?;
                Ok(Box::new(agent))
            }
        }
    }
}

/// When the mistake diagnostic refreshes its policy-value snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MistakeCadence {
    /// Re-evaluate only after successful updates (the policy is constant in
    /// between for the delayed-style agents).
    #[default]
    SuccessfulUpdate,
    /// Re-check the greedy policy every step.
    EveryStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Diagnostics {
    /// Count steps whose greedy-policy value at the visited state falls more
    /// than `mistake_epsilon` below optimal.
    pub mistake_count: bool,
    /// Audit `acting_value >= Q*` at initialization and after every commit.
    pub optimism: bool,
    /// Count steps that experience a pair outside the known set.
    pub escape_count: bool,
    pub mistake_epsilon: f64,
    pub cadence: MistakeCadence,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            mistake_count: false,
            optimism: false,
            escape_count: false,
            mistake_epsilon: 0.1,
            cadence: MistakeCadence::default(),
        }
    }
}

/// Summary/record output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    #[default]
    Table,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "table" => Ok(OutputFormat::Table),
            other => Err(format!("unknown format `{other}` (expected csv or table)")),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    pub format: OutputFormat,
    /// Where to write the summary; stdout when absent.
    pub summary_path: Option<PathBuf>,
    /// Where to write one CSV row per run; omitted when absent.
    pub per_run_path: Option<PathBuf>,
}

fn default_horizon() -> usize {
    10_000
}

fn default_num_runs() -> usize {
    300
}

fn default_base_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_num_runs")]
    pub num_runs: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    /// Keep the per-step reward stream on every record.
    #[serde(default)]
    pub retain_rewards: bool,
    /// Directory for per-step CSV traces of seed 0 of each method.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| HarnessError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(config_err("horizon", "must be at least 1"));
        }
        if self.num_runs < 1 {
            return Err(config_err("num_runs", "must be at least 1"));
        }
        if self.num_runs > u32::MAX as usize {
            return Err(config_err("num_runs", "must fit in 32 bits"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "must list at least one method"));
        }
        if self.methods.len() > u32::MAX as usize {
            return Err(config_err("methods", "too many methods"));
        }
        if !(self.diagnostics.mistake_epsilon > 0.0) {
            return Err(config_err("diagnostics.mistake_epsilon", "must be positive"));
        }
        for (i, method) in self.methods.iter().enumerate() {
            method.validate(i)?;
        }
        Ok(())
    }
}

/// Statistics of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method_index: usize,
    pub method: String,
    pub gamma_e: Option<f64>,
    pub seed_index: u64,
    /// Undiscounted sum of per-step rewards.
    pub cumulative_reward: f64,
    /// Per-step reward stream, kept only when `retain_rewards` is set.
    pub rewards: Option<Vec<f64>>,
    pub attempted_updates: u64,
    pub successful_updates: u64,
    /// Total inline invariant violations reported by the agent.
    pub invariant_violations: u64,
    pub mistake_count: Option<u64>,
    pub optimism_violations: Option<u64>,
    /// Steps experiencing a pair outside the known set, with state values
    /// formed from the plain Q table.
    pub escape_count_greedy: Option<u64>,
    /// Same, with state values formed from the bonus-augmented table.
    pub escape_count_acting: Option<u64>,
}

/// The per-run random stream: ChaCha keyed by the base seed, with the
/// `(method, seed)` pair selecting the stream counter. Independent of
/// scheduling by construction.
pub fn run_rng(base_seed: u64, method_index: usize, seed_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((method_index as u64) << 32) | seed_index);
    rng
}

struct MistakeTracker<'a> {
    mdp: &'a FiniteMdp,
    v_star: &'a [f64],
    epsilon: f64,
    cadence: MistakeCadence,
    policy: Option<Vec<f64>>,
    v_pi: Vec<f64>,
    dirty: bool,
    count: u64,
}

impl<'a> MistakeTracker<'a> {
    fn new(mdp: &'a FiniteMdp, v_star: &'a [f64], epsilon: f64, cadence: MistakeCadence) -> Self {
        Self {
            mdp,
            v_star,
            epsilon,
            cadence,
            policy: None,
            v_pi: Vec::new(),
            dirty: true,
            count: 0,
        }
    }

    fn acting_table(&self, agent: &dyn Agent) -> Vec<f64> {
        let (s_n, a_n) = (agent.num_states(), agent.num_actions());
        let mut table = vec![0.0; s_n * a_n];
        for s in 0..s_n {
            for a in 0..a_n {
                table[s * a_n + a] = agent.acting_value(s, a);
            }
        }
        table
    }

    fn before_act(&mut self, agent: &dyn Agent, state: usize) -> Result<(), HarnessError> {
        if self.dirty {
            let table = self.acting_table(agent);
            let policy = greedy_policy(&table, agent.num_states(), agent.num_actions());
            if self.policy.as_ref() != Some(&policy) {
                self.v_pi = evaluate_policy(self.mdp, &policy, DIAG_TOL)?;
                self.policy = Some(policy);
            }
            self.dirty = false;
        }
        if self.v_pi[state] < self.v_star[state] - self.epsilon {
            self.count += 1;
        }
        Ok(())
    }

    fn after_observe(&mut self, succeeded: bool) {
        match self.cadence {
            MistakeCadence::SuccessfulUpdate => {
                if succeeded {
                    self.dirty = true;
                }
            }
            MistakeCadence::EveryStep => self.dirty = true,
        }
    }
}

struct OptimismTracker<'a> {
    q_star: &'a [f64],
    num_actions: usize,
    violations: u64,
}

impl<'a> OptimismTracker<'a> {
    fn new(agent: &dyn Agent, q_star: &'a [f64]) -> Self {
        let mut tracker = Self {
            q_star,
            num_actions: agent.num_actions(),
            violations: 0,
        };
        for s in 0..agent.num_states() {
            for a in 0..agent.num_actions() {
                tracker.check_pair(agent, s, a);
            }
        }
        tracker
    }

    fn check_pair(&mut self, agent: &dyn Agent, state: usize, action: usize) {
        if agent.acting_value(state, action) < self.q_star[state * self.num_actions + action] {
            self.violations += 1;
        }
    }
}

struct EscapeTracker<'a> {
    mdp: &'a FiniteMdp,
    threshold: f64,
    count_greedy: u64,
    count_acting: u64,
}

impl<'a> EscapeTracker<'a> {
    fn new(mdp: &'a FiniteMdp, epsilon1: f64) -> Self {
        Self {
            mdp,
            threshold: 4.0 * epsilon1,
            count_greedy: 0,
            count_acting: 0,
        }
    }

    fn check(&mut self, agent: &dyn Agent, state: usize, action: usize) {
        let (s_n, a_n) = (agent.num_states(), agent.num_actions());
        let pair_value = agent.acting_value(state, action);
        let mut v_greedy = vec![f64::NEG_INFINITY; s_n];
        let mut v_acting = vec![f64::NEG_INFINITY; s_n];
        for s in 0..s_n {
            for a in 0..a_n {
                v_greedy[s] = v_greedy[s].max(agent.q_value(s, a));
                v_acting[s] = v_acting[s].max(agent.acting_value(s, a));
            }
        }
        if pair_bellman_gap(self.mdp, state, action, pair_value, &v_greedy) > self.threshold {
            self.count_greedy += 1;
        }
        if pair_bellman_gap(self.mdp, state, action, pair_value, &v_acting) > self.threshold {
            self.count_acting += 1;
        }
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    mdp: &FiniteMdp,
    solve: Option<&SolveResult>,
    method_index: usize,
    seed_index: u64,
    mut trace: Option<&mut dyn Write>,
) -> Result<RunRecord, HarnessError> {
    let method = &cfg.methods[method_index];
    let mut agent = method.build_agent(mdp, method_index)?;
    let mut rng = run_rng(cfg.base_seed, method_index, seed_index);
    let diag = &cfg.diagnostics;

    let mut mistake = match (diag.mistake_count, solve) {
        (true, Some(solved)) => Some(MistakeTracker::new(
            mdp,
            &solved.v_star,
            diag.mistake_epsilon,
            diag.cadence,
        )),
        _ => None,
    };
    let mut optimism = match (diag.optimism, solve) {
        (true, Some(solved)) => Some(OptimismTracker::new(agent.as_ref(), &solved.q_star)),
        _ => None,
    };
    let mut escape = if diag.escape_count {
        method.epsilon1().map(|eps1| EscapeTracker::new(mdp, eps1))
    } else {
        None
    };

    if let Some(w) = trace.as_mut() {
        writeln!(w, "t,s,a,r,s_next,attempted,succeeded,q_prime")?;
    }

    let mut cumulative = 0.0;
    let mut rewards = cfg.retain_rewards.then(|| Vec::with_capacity(cfg.horizon));
    let mut attempted = 0u64;
    let mut succeeded = 0u64;
    let mut state = mdp.start_state();
    for t in 1..=cfg.horizon {
        if let Some(tracker) = mistake.as_mut() {
            tracker.before_act(agent.as_ref(), state)?;
        }
        let action = agent.act(state, &mut rng)?;
        if let Some(tracker) = escape.as_mut() {
            tracker.check(agent.as_ref(), state, action);
        }
        let (next_state, reward) = mdp.step(state, action, &mut rng)?;
        let report = agent.observe(state, action, reward, next_state)?;
        attempted += u64::from(report.attempted);
        succeeded += u64::from(report.succeeded);
        if report.succeeded {
            if let Some(tracker) = optimism.as_mut() {
                tracker.check_pair(agent.as_ref(), state, action);
            }
        }
        if let Some(tracker) = mistake.as_mut() {
            tracker.after_observe(report.succeeded);
        }
        cumulative += reward;
        if let Some(stream) = rewards.as_mut() {
            stream.push(reward);
        }
        if let Some(w) = trace.as_mut() {
            writeln!(
                w,
                "{t},{state},{action},{reward},{next_state},{},{},{}",
                report.attempted,
                report.succeeded,
                agent.acting_value(state, action)
            )?;
        }
        state = next_state;
    }

    Ok(RunRecord {
        method_index,
        method: method.name().to_string(),
        gamma_e: method.gamma_e(),
        seed_index,
        cumulative_reward: cumulative,
        rewards,
        attempted_updates: attempted,
        successful_updates: succeeded,
        invariant_violations: agent.invariant_counts().total(),
        mistake_count: mistake.map(|t| t.count),
        optimism_violations: optimism.map(|t| t.violations),
        escape_count_greedy: escape.as_ref().map(|t| t.count_greedy),
        escape_count_acting: escape.as_ref().map(|t| t.count_acting),
    })
}

fn solve_if_needed(
    cfg: &ExperimentConfig,
    mdp: &FiniteMdp,
) -> Result<Option<SolveResult>, HarnessError> {
    if cfg.diagnostics.mistake_count || cfg.diagnostics.optimism {
        Ok(Some(value_iteration(mdp, DIAG_TOL, DIAG_MAX_ITER)?))
    } else {
        Ok(None)
    }
}

/// Executes one `(method, seed)` cell of the experiment.
pub fn run_single(
    cfg: &ExperimentConfig,
    method_index: usize,
    seed_index: u64,
) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    if method_index >= cfg.methods.len() {
        return Err(config_err("methods", format!("no method at index {method_index}")));
    }
    let mdp = cfg.mdp.build()?;
    let solve = solve_if_needed(cfg, &mdp)?;
    run_one(cfg, &mdp, solve.as_ref(), method_index, seed_index, None)
}

fn trace_file_name(cfg: &ExperimentConfig, method_index: usize) -> String {
    let method = &cfg.methods[method_index];
    match method.gamma_e() {
        Some(g) => format!("m{method_index}_{}_{g}.csv", method.name()),
        None => format!("m{method_index}_{}.csv", method.name()),
    }
}

/// Executes the full experiment grid in parallel.
///
/// Records come back in `(method_index, seed_index)` lexicographic order
/// regardless of scheduling; `threads` caps the worker count (library
/// default when absent).
pub fn run_config(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    let mdp = cfg.mdp.build()?;
    let solve = solve_if_needed(cfg, &mdp)?;
    if let Some(dir) = &cfg.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let total = cfg.methods.len() * cfg.num_runs;
    let execute = || -> Result<Vec<RunRecord>, HarnessError> {
        (0..total)
            .into_par_iter()
            .map(|task| {
                let method_index = task / cfg.num_runs;
                let seed_index = (task % cfg.num_runs) as u64;
                let mut trace_file = match (&cfg.trace_dir, seed_index) {
                    (Some(dir), 0) => Some(fs::File::create(
                        dir.join(trace_file_name(cfg, method_index)),
                    )?),
                    _ => None,
                };
                run_one(
                    cfg,
                    &mdp,
                    solve.as_ref(),
                    method_index,
                    seed_index,
                    trace_file.as_mut().map(|f| f as &mut dyn Write),
                )
            })
            .collect()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(execute),
        None => execute(),
    }
}

/// One aggregated summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub gamma_e: Option<f64>,
    pub mean: f64,
    /// `1.96 * sample_sd / sqrt(n)`; absent for single-run methods.
    pub ci_half_width: Option<f64>,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Aggregates per-run records into mean and 95% confidence half-width per
/// method, using the normal approximation. Rows follow the method order of
/// the records (grouped by `method_index`).
pub fn aggregate(records: &[RunRecord]) -> SummaryTable {
    let mut order: Vec<usize> = Vec::new();
    for r in records {
        if !order.contains(&r.method_index) {
            order.push(r.method_index);
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for idx in order {
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.method_index == idx).collect();
        let n = group.len();
        let mean = group.iter().map(|r| r.cumulative_reward).sum::<f64>() / n as f64;
        let ci_half_width = if n >= 2 {
            let var = group
                .iter()
                .map(|r| (r.cumulative_reward - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            Some(1.96 * var.sqrt() / (n as f64).sqrt())
        } else {
            None
        };
        rows.push(SummaryRow {
            method: group[0].method.clone(),
            gamma_e: group[0].gamma_e,
            mean,
            ci_half_width,
            n_runs: n,
        });
    }
    SummaryTable { rows }
}
