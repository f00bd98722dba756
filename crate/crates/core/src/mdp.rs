//! Exact finite discounted MDPs stored as dense tensors.
//!
//! A [`FiniteMdp`] holds the transition kernel `T(s'|s,a)` and the
//! deterministic reward function `R(s,a,s')` as flat `S*A*S` arrays. It is
//! immutable after construction, so a single instance can back any number of
//! concurrent simulation runs; each run brings its own random stream.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Action index for moving left in a chain environment.
pub const LEFT: usize = 0;
/// Action index for moving right in a chain environment.
pub const RIGHT: usize = 1;

/// Tolerance for transition rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("chain length must be at least 2, got {0}")]
    ChainTooShort(usize),
    #[error("slip_prob must lie in [0, 1), got {0}")]
    SlipProbOutOfRange(f64),
    #[error("small_reward ({small}) must be strictly below large_reward ({large})")]
    RewardOrder { small: f64, large: f64 },
    #[error("state index {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action index {action} out of range for {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("tensor has {got} entries, expected {expected} ({what})")]
    TensorShape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("num_states and num_actions must be positive")]
    EmptySpace,
    #[error("invalid MDP: {0}")]
    Invalid(ValidationReport),
    #[error("malformed MDP document: {0}")]
    Document(String),
}

/// A single violated invariant, with enough context to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Transition row does not sum to one; `deficit = 1 - sum`.
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
        deficit: f64,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        next_state: usize,
        prob: f64,
    },
    /// A reachable reward lies outside `[0, r_max]`.
    RewardOutOfRange {
        state: usize,
        action: usize,
        next_state: usize,
        reward: f64,
        r_max: f64,
    },
    DiscountOutOfRange { discount: f64 },
    NegativeRmax { r_max: f64 },
    StartStateOutOfRange { start_state: usize, num_states: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum {
                state,
                action,
                sum,
                deficit,
            } => write!(
                f,
                "transition row (s={state}, a={action}) sums to {sum} (deficit {deficit})"
            ),
            Violation::NegativeProbability {
                state,
                action,
                next_state,
                prob,
            } => write!(
                f,
                "negative transition probability {prob} at (s={state}, a={action}, s'={next_state})"
            ),
            Violation::RewardOutOfRange {
                state,
                action,
                next_state,
                reward,
                r_max,
            } => write!(
                f,
                "reachable reward {reward} at (s={state}, a={action}, s'={next_state}) outside [0, {r_max}]"
            ),
            Violation::DiscountOutOfRange { discount } => {
                write!(f, "discount {discount} outside [0, 1)")
            }
            Violation::NegativeRmax { r_max } => write!(f, "r_max {r_max} is negative"),
            Violation::StartStateOutOfRange {
                start_state,
                num_states,
            } => write!(
                f,
                "start_state {start_state} out of range for {num_states} states"
            ),
        }
    }
}

/// Result of [`validate`]: empty iff the MDP satisfies every invariant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A finite discounted MDP with deterministic rewards on `(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    r_max: f64,
    start_state: usize,
    /// Flat `S*A*S` tensor: `transition[(s*A + a)*S + s']`.
    transition: Vec<f64>,
    /// Flat `S*A*S` tensor, same layout as `transition`.
    reward: Vec<f64>,
}

impl FiniteMdp {
    /// Builds an MDP and rejects it unless every invariant holds.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        r_max: f64,
        start_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let mdp = Self::new_unchecked(
            num_states,
            num_actions,
            discount,
            r_max,
            start_state,
            transition,
            reward,
        )?;
        let report = validate(&mdp);
        if report.is_valid() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(report))
        }
    }

    /// Builds an MDP checking only tensor shapes, not value invariants.
    ///
    /// Useful for constructing deliberately broken MDPs to exercise
    /// [`validate`].
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        r_max: f64,
        start_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::EmptySpace);
        }
        let expected = num_states * num_actions * num_states;
        if transition.len() != expected {
            return Err(MdpError::TensorShape {
                what: "transition",
                expected,
                got: transition.len(),
            });
        }
        if reward.len() != expected {
            return Err(MdpError::TensorShape {
                what: "reward",
                expected,
                got: reward.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            discount,
            r_max,
            start_state,
            transition,
            reward,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    #[inline]
    fn pair_offset(&self, state: usize, action: usize) -> usize {
        (state * self.num_actions + action) * self.num_states
    }

    /// Next-state distribution for `(state, action)`.
    #[inline]
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let off = self.pair_offset(state, action);
        &self.transition[off..off + self.num_states]
    }

    #[inline]
    pub fn transition_prob(&self, state: usize, action: usize, next_state: usize) -> f64 {
        self.transition[self.pair_offset(state, action) + next_state]
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize, next_state: usize) -> f64 {
        self.reward[self.pair_offset(state, action) + next_state]
    }

    /// Exact mean one-step reward `sum_s' T(s'|s,a) R(s,a,s')`.
    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        let off = self.pair_offset(state, action);
        let mut acc = 0.0;
        for s2 in 0..self.num_states {
            acc += self.transition[off + s2] * self.reward[off + s2];
        }
        acc
    }

    fn check_indices(&self, state: usize, action: usize) -> Result<(), MdpError> {
        if state >= self.num_states {
            return Err(MdpError::StateOutOfRange {
                state,
                num_states: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(MdpError::ActionOutOfRange {
                action,
                num_actions: self.num_actions,
            });
        }
        Ok(())
    }

    /// Samples one transition, consuming exactly one uniform draw.
    ///
    /// Returns the sampled next state and the (deterministic) reward
    /// `R(s, a, s')`.
    pub fn step(
        &self,
        state: usize,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, f64), MdpError> {
        self.check_indices(state, action)?;
        let u: f64 = rng.gen();
        let row = self.transition_row(state, action);
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_nonzero = state;
        for (s2, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            last_nonzero = s2;
            acc += p;
            if u < acc {
                chosen = Some(s2);
                break;
            }
        }
        // Rounding can leave acc marginally below 1; fall back to the last
        // reachable state.
        let next = chosen.unwrap_or(last_nonzero);
        Ok((next, self.reward(state, action, next)))
    }

    /// Serializes to the JSON document schema (nested `S*A*S` arrays).
    pub fn to_json(&self) -> String {
        let doc = MdpDocument::from_mdp(self);
        serde_json::to_string_pretty(&doc).expect("MDP document serialization cannot fail")
    }

    /// Parses the JSON document schema and validates the result.
    ///
    /// `r_max` may be omitted in the document, in which case it defaults to
    /// the largest reward entry.
    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        let doc: MdpDocument =
            serde_json::from_str(text).map_err(|e| MdpError::Document(e.to_string()))?;
        doc.into_mdp()
    }
}

/// Checks every [`FiniteMdp`] invariant and reports all violations.
pub fn validate(mdp: &FiniteMdp) -> ValidationReport {
    let mut violations = Vec::new();
    if !(0.0..1.0).contains(&mdp.discount) {
        violations.push(Violation::DiscountOutOfRange {
            discount: mdp.discount,
        });
    }
    if mdp.r_max < 0.0 {
        violations.push(Violation::NegativeRmax { r_max: mdp.r_max });
    }
    if mdp.start_state >= mdp.num_states {
        violations.push(Violation::StartStateOutOfRange {
            start_state: mdp.start_state,
            num_states: mdp.num_states,
        });
    }
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let row = mdp.transition_row(s, a);
            let mut sum = 0.0;
            for (s2, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    violations.push(Violation::NegativeProbability {
                        state: s,
                        action: a,
                        next_state: s2,
                        prob: p,
                    });
                }
                sum += p;
                if p > 0.0 {
                    let r = mdp.reward(s, a, s2);
                    if !(0.0..=mdp.r_max).contains(&r) {
                        violations.push(Violation::RewardOutOfRange {
                            state: s,
                            action: a,
                            next_state: s2,
                            reward: r,
                            r_max: mdp.r_max,
                        });
                    }
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                violations.push(Violation::RowSum {
                    state: s,
                    action: a,
                    sum,
                    deficit: 1.0 - sum,
                });
            }
        }
    }
    ValidationReport { violations }
}

fn default_slip_prob() -> f64 {
    0.2
}

fn default_small_reward() -> f64 {
    0.001
}

fn default_large_reward() -> f64 {
    1.0
}

fn default_chain_discount() -> f64 {
    0.99
}

/// Parameters of the slippery chain environment.
///
/// States are `0` (leftmost, the start) through `length - 1` (rightmost).
/// An intended move succeeds with probability `1 - slip_prob` and executes
/// the opposite move otherwise; moving past a boundary keeps the agent at
/// that boundary state. Reward depends only on the arrival state:
/// `small_reward` for landing on (or staying at) state 0, `large_reward`
/// for state `length - 1`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub length: usize,
    #[serde(default = "default_slip_prob")]
    pub slip_prob: f64,
    #[serde(default = "default_small_reward")]
    pub small_reward: f64,
    #[serde(default = "default_large_reward")]
    pub large_reward: f64,
    #[serde(default = "default_chain_discount")]
    pub discount: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            length: 10,
            slip_prob: default_slip_prob(),
            small_reward: default_small_reward(),
            large_reward: default_large_reward(),
            discount: default_chain_discount(),
        }
    }
}

impl ChainSpec {
    pub fn with_length(length: usize) -> Self {
        Self {
            length,
            ..Self::default()
        }
    }
}

/// Builds the chain MDP described by `spec`.
pub fn make_chain(spec: &ChainSpec) -> Result<FiniteMdp, MdpError> {
    let n = spec.length;
    if n < 2 {
        return Err(MdpError::ChainTooShort(n));
    }
    if !(0.0..1.0).contains(&spec.slip_prob) {
        return Err(MdpError::SlipProbOutOfRange(spec.slip_prob));
    }
    if spec.small_reward >= spec.large_reward {
        return Err(MdpError::RewardOrder {
            small: spec.small_reward,
            large: spec.large_reward,
        });
    }
    let num_actions = 2;
    let mut transition = vec![0.0; n * num_actions * n];
    let mut reward = vec![0.0; n * num_actions * n];
    let arrival_reward = |s2: usize| -> f64 {
        if s2 == 0 {
            spec.small_reward
        } else if s2 == n - 1 {
            spec.large_reward
        } else {
            0.0
        }
    };
    for s in 0..n {
        let left_target = s.saturating_sub(1);
        let right_target = (s + 1).min(n - 1);
        for a in [LEFT, RIGHT] {
            let (intended, opposite) = if a == LEFT {
                (left_target, right_target)
            } else {
                (right_target, left_target)
            };
            let off = (s * num_actions + a) * n;
            transition[off + intended] += 1.0 - spec.slip_prob;
            transition[off + opposite] += spec.slip_prob;
            for s2 in 0..n {
                reward[off + s2] = arrival_reward(s2);
            }
        }
    }
    FiniteMdp::new(
        n,
        num_actions,
        spec.discount,
        spec.large_reward,
        0,
        transition,
        reward,
    )
}

/// On-disk JSON schema of a [`FiniteMdp`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<Vec<f64>>>,
    start_state: usize,
    #[serde(default)]
    r_max: Option<f64>,
}

impl MdpDocument {
    fn from_mdp(mdp: &FiniteMdp) -> Self {
        let nested = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            (0..mdp.num_states)
                .map(|s| {
                    (0..mdp.num_actions)
                        .map(|a| {
                            let off = mdp.pair_offset(s, a);
                            flat[off..off + mdp.num_states].to_vec()
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            discount: mdp.discount,
            transition: nested(&mdp.transition),
            reward: nested(&mdp.reward),
            start_state: mdp.start_state,
            r_max: Some(mdp.r_max),
        }
    }

    fn into_mdp(self) -> Result<FiniteMdp, MdpError> {
        let flatten = |nested: &[Vec<Vec<f64>>], what: &'static str| -> Result<Vec<f64>, MdpError> {
            let mut flat = Vec::with_capacity(self.num_states * self.num_actions * self.num_states);
            if nested.len() != self.num_states {
                return Err(MdpError::Document(format!(
                    "{what} has {} state rows, expected {}",
                    nested.len(),
                    self.num_states
                )));
            }
            for (s, per_action) in nested.iter().enumerate() {
                if per_action.len() != self.num_actions {
                    return Err(MdpError::Document(format!(
                        "{what}[{s}] has {} action rows, expected {}",
                        per_action.len(),
                        self.num_actions
                    )));
                }
                for (a, row) in per_action.iter().enumerate() {
                    if row.len() != self.num_states {
                        return Err(MdpError::Document(format!(
                            "{what}[{s}][{a}] has {} entries, expected {}",
                            row.len(),
                            self.num_states
                        )));
                    }
                    flat.extend_from_slice(row);
                }
            }
            Ok(flat)
        };
        let transition = flatten(&self.transition, "transition")?;
        let reward = flatten(&self.reward, "reward")?;
        let r_max = self
            .r_max
            .unwrap_or_else(|| reward.iter().copied().fold(0.0, f64::max));
        FiniteMdp::new(
            self.num_states,
            self.num_actions,
            self.discount,
            r_max,
            self.start_state,
            transition,
            reward,
        )
    }
}
