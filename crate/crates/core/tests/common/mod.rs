//! Shared fixtures and independent oracles for integration tests.
//!
//! The brute-force routines here deliberately avoid the library's solver
//! path: deterministic policies on deterministic MDPs are evaluated in
//! closed form by following the single trajectory to its cycle, so they can
//! serve as ground truth for `value_iteration`.

use ddql::mdp::FiniteMdp;

/// Fixed two-state micro environment used by the theoretical-parameter
/// audits: action 0 mostly stays, action 1 mostly switches, arrival at
/// state 1 pays 1.0 and arrival at state 0 pays 0.1.
pub fn micro_mdp() -> FiniteMdp {
    let s_n = 2;
    let a_n = 2;
    let mut t = vec![0.0; s_n * a_n * s_n];
    let mut r = vec![0.0; s_n * a_n * s_n];
    let idx = |s: usize, a: usize, s2: usize| (s * a_n + a) * s_n + s2;
    for s in 0..s_n {
        let other = 1 - s;
        t[idx(s, 0, s)] = 0.9;
        t[idx(s, 0, other)] = 0.1;
        t[idx(s, 1, other)] = 0.8;
        t[idx(s, 1, s)] = 0.2;
        for a in 0..a_n {
            r[idx(s, a, 0)] = 0.1;
            r[idx(s, a, 1)] = 1.0;
        }
    }
    FiniteMdp::new(s_n, a_n, 0.5, 1.0, 0, t, r).unwrap()
}

/// Exact value of a deterministic policy on a deterministic MDP, computed
/// by walking the unique trajectory from `state` until it enters a cycle
/// and summing the discounted rewards in closed form.
pub fn deterministic_policy_value(
    successor: &[usize],
    reward: &[f64],
    discount: f64,
    state: usize,
) -> f64 {
    let n = successor.len();
    // Position of each state along the walk, if visited.
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut current = state;
    while seen[current] == usize::MAX {
        seen[current] = path.len();
        path.push(current);
        current = successor[current];
    }
    let cycle_start = seen[current];
    // Discounted reward collected along the pre-cycle stem.
    let mut value = 0.0;
    let mut factor = 1.0;
    for &s in &path[..cycle_start] {
        value += factor * reward[s];
        factor *= discount;
    }
    // Cycle value: sum over one period divided by (1 - gamma^L).
    let cycle = &path[cycle_start..];
    let mut cycle_sum = 0.0;
    let mut inner = 1.0;
    for &s in cycle {
        cycle_sum += inner * reward[s];
        inner *= discount;
    }
    let period = discount.powi(cycle.len() as i32);
    value + factor * cycle_sum / (1.0 - period)
}

/// Optimal state values of a deterministic MDP by exhaustive enumeration of
/// all `A^S` stationary deterministic policies.
pub fn brute_force_v_star(
    num_states: usize,
    num_actions: usize,
    successor: &[usize], // flat S*A: successor of (s, a)
    reward: &[f64],      // flat S*A: reward of taking a in s
    discount: f64,
) -> Vec<f64> {
    let policies = num_actions.pow(num_states as u32);
    let mut best = vec![f64::NEG_INFINITY; num_states];
    for code in 0..policies {
        let mut c = code;
        let mut succ = vec![0usize; num_states];
        let mut r = vec![0.0; num_states];
        for s in 0..num_states {
            let a = c % num_actions;
            c /= num_actions;
            succ[s] = successor[s * num_actions + a];
            r[s] = reward[s * num_actions + a];
        }
        for s in 0..num_states {
            let v = deterministic_policy_value(&succ, &r, discount, s);
            if v > best[s] {
                best[s] = v;
            }
        }
    }
    best
}

/// Builds the dense MDP corresponding to a deterministic successor/reward
/// table so the library solver can be run on it.
pub fn deterministic_mdp(
    num_states: usize,
    num_actions: usize,
    successor: &[usize],
    reward: &[f64],
    discount: f64,
    r_max: f64,
) -> FiniteMdp {
    let mut t = vec![0.0; num_states * num_actions * num_states];
    let mut r_tensor = vec![0.0; num_states * num_actions * num_states];
    for s in 0..num_states {
        for a in 0..num_actions {
            let s2 = successor[s * num_actions + a];
            let off = (s * num_actions + a) * num_states;
            t[off + s2] = 1.0;
            r_tensor[off + s2] = reward[s * num_actions + a];
        }
    }
    FiniteMdp::new(num_states, num_actions, discount, r_max, 0, t, r_tensor).unwrap()
}
