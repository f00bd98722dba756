//! Dynamic-programming oracle: optimal values, policy evaluation, and the
//! known-set diagnostic.
//!
//! All routines are synchronous sweeps with sup-norm stopping. They operate
//! on the true model, so they serve as the ground truth against which the
//! sampling agents are audited.

use crate::mdp::FiniteMdp;
use crate::params::{HyperParams, ParamsError};
use thiserror::Error;

/// Default sup-norm stopping tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap for [`evaluate_policy`].
const POLICY_EVAL_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("did not converge within {iterations} iterations (residual {residual})")]
    NotConverged { residual: f64, iterations: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("policy table has {got} entries, expected {expected}")]
    PolicyShape { expected: usize, got: usize },
    #[error("policy row for state {state} sums to {sum}, expected 1")]
    PolicyRow { state: usize, sum: f64 },
    #[error("value table has {got} entries, expected {expected}")]
    TableShape { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Output of [`value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Optimal state values, length `S`.
    pub v_star: Vec<f64>,
    /// Optimal action values, flat `S*A` (row-major by state).
    pub q_star: Vec<f64>,
    /// Final sup-norm Bellman residual.
    pub residual: f64,
    /// Number of sweeps performed.
    pub iterations: usize,
}

impl SolveResult {
    #[inline]
    pub fn q(&self, state: usize, action: usize, num_actions: usize) -> f64 {
        self.q_star[state * num_actions + action]
    }
}

/// One synchronous Bellman-optimality sweep; returns the improved state
/// values and the action values built from `v`.
pub fn bellman_backup(mdp: &FiniteMdp, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut q = vec![0.0; s_n * a_n];
    let mut v_new = vec![0.0; s_n];
    for s in 0..s_n {
        let mut best = f64::NEG_INFINITY;
        for a in 0..a_n {
            let row = mdp.transition_row(s, a);
            let mut acc = 0.0;
            for (s2, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p * (mdp.reward(s, a, s2) + gamma * v[s2]);
                }
            }
            q[s * a_n + a] = acc;
            if acc > best {
                best = acc;
            }
        }
        v_new[s] = best;
    }
    (v_new, q)
}

/// Solves for `V*`/`Q*` by synchronous value iteration.
///
/// Stops once a sweep moves the value vector by at most `tol` in sup norm;
/// the returned `q_star` is the exact backup of that vector and
/// `v_star(s) = max_a q_star(s, a)` holds identically. Non-convergence
/// within `max_iter` sweeps is an explicit error.
pub fn value_iteration(
    mdp: &FiniteMdp,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance(tol));
    }
    let mut v = vec![0.0; mdp.num_states()];
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let (v_new, _) = bellman_backup(mdp, &v);
        residual = sup_norm_diff(&v_new, &v);
        v = v_new;
        if residual <= tol {
            let (v_star, q_star) = bellman_backup(mdp, &v);
            let final_residual = sup_norm_diff(&v_star, &v);
            return Ok(SolveResult {
                v_star,
                q_star,
                residual: final_residual,
                iterations: iteration,
            });
        }
    }
    Err(SolverError::NotConverged {
        residual,
        iterations: max_iter,
    })
}

/// Evaluates a stationary stochastic policy to sup-norm tolerance `tol`.
///
/// `policy` is flat `S*A`: `policy[s*A + a]` is the probability of taking
/// `a` in `s`; every row must be a probability vector.
pub fn evaluate_policy(
    mdp: &FiniteMdp,
    policy: &[f64],
    tol: f64,
) -> Result<Vec<f64>, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance(tol));
    }
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    if policy.len() != s_n * a_n {
        return Err(SolverError::PolicyShape {
            expected: s_n * a_n,
            got: policy.len(),
        });
    }
    for s in 0..s_n {
        let row = &policy[s * a_n..(s + 1) * a_n];
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(SolverError::PolicyRow { state: s, sum });
        }
    }
    let gamma = mdp.discount();
    let mut v = vec![0.0; s_n];
    let mut residual = f64::INFINITY;
    for _ in 0..POLICY_EVAL_MAX_ITER {
        let mut v_new = vec![0.0; s_n];
        for s in 0..s_n {
            let mut acc = 0.0;
            for a in 0..a_n {
                let pi = policy[s * a_n + a];
                if pi == 0.0 {
                    continue;
                }
                let row = mdp.transition_row(s, a);
                let mut backup = 0.0;
                for (s2, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        backup += p * (mdp.reward(s, a, s2) + gamma * v[s2]);
                    }
                }
                acc += pi * backup;
            }
            v_new[s] = acc;
        }
        residual = sup_norm_diff(&v_new, &v);
        v = v_new;
        if residual <= tol {
            return Ok(v);
        }
    }
    Err(SolverError::NotConverged {
        residual,
        iterations: POLICY_EVAL_MAX_ITER,
    })
}

/// Greedy policy over a flat `S*A` value table, uniform across exact ties.
pub fn greedy_policy(values: &[f64], num_states: usize, num_actions: usize) -> Vec<f64> {
    let mut policy = vec![0.0; num_states * num_actions];
    for s in 0..num_states {
        let row = &values[s * num_actions..(s + 1) * num_actions];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = row.iter().filter(|&&v| v == best).count();
        let w = 1.0 / ties as f64;
        for a in 0..num_actions {
            if row[a] == best {
                policy[s * num_actions + a] = w;
            }
        }
    }
    policy
}

/// How the state value `V(s)` inside the known-set criterion is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateValueMode {
    /// `V(s) = max_a Q(s, a)` (bonus-free).
    Greedy,
    /// `V(s) = max_a (Q(s, a) + bonus(E(s, a)))`.
    GreedyWithBonus,
}

/// Pairs whose optimistic value has small Bellman error under the true model.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownSet {
    num_actions: usize,
    mask: Vec<bool>,
}

impl KnownSet {
    pub fn contains(&self, state: usize, action: usize) -> bool {
        self.mask[state * self.num_actions + action]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    /// Member pairs in `(state, action)` lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i / self.num_actions, i % self.num_actions))
            .collect()
    }
}

/// Bellman gap of one pair: `value - (R(s,a) + gamma * sum_s' T(s'|s,a) V(s'))`,
/// with `R` the exact mean reward under the true model.
pub fn pair_bellman_gap(
    mdp: &FiniteMdp,
    state: usize,
    action: usize,
    pair_value: f64,
    state_values: &[f64],
) -> f64 {
    let gamma = mdp.discount();
    let row = mdp.transition_row(state, action);
    let mut backup = 0.0;
    for (s2, &p) in row.iter().enumerate() {
        if p > 0.0 {
            backup += p * (mdp.reward(state, action, s2) + gamma * state_values[s2]);
        }
    }
    pair_value - backup
}

/// Computes the known set: all pairs whose bonus-augmented value exceeds its
/// exact Bellman backup by at most `4 * epsilon1`.
///
/// `q` and `e` are flat `S*A` tables taken from an agent; the state value
/// entering the backup is formed per `mode` (the analysis leaves this
/// choice open, so both readings are available).
pub fn known_set(
    mdp: &FiniteMdp,
    q: &[f64],
    e: &[f64],
    params: &HyperParams,
    mode: StateValueMode,
) -> Result<KnownSet, SolverError> {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let expected = s_n * a_n;
    if q.len() != expected || e.len() != expected {
        return Err(SolverError::TableShape {
            expected,
            got: if q.len() != expected { q.len() } else { e.len() },
        });
    }
    let mut q_prime = vec![0.0; expected];
    for i in 0..expected {
        q_prime[i] = q[i] + params.bonus(e[i])?;
    }
    let source = match mode {
        StateValueMode::Greedy => q,
        StateValueMode::GreedyWithBonus => &q_prime[..],
    };
    let mut state_values = vec![0.0; s_n];
    for s in 0..s_n {
        state_values[s] = source[s * a_n..(s + 1) * a_n]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let threshold = 4.0 * params.epsilon1;
    let mut mask = vec![false; expected];
    for s in 0..s_n {
        for a in 0..a_n {
            let gap = pair_bellman_gap(mdp, s, a, q_prime[s * a_n + a], &state_values);
            mask[s * a_n + a] = gap <= threshold;
        }
    }
    Ok(KnownSet {
        num_actions: a_n,
        mask,
    })
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
