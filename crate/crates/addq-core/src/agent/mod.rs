//! Tabular learners and their shared plumbing: visit-count step sizes,
//! deterministic greedy selection, exploration policies, and the `Learner`
//! interface the experiment harness drives.

mod distributional;
mod ensemble;
mod scalar;

pub use distributional::{
    dist_ql_target, double_dist_target, relative_variance, BetaPolicy, BetaSchedule, BetaSegment,
    DistAgent, DistDoubleAgent, Repr, ReturnTable,
};
pub use ensemble::{EnsembleAgent, EnsembleKind};
pub use scalar::{double_bootstrap, DoubleAgent, DoubleKind, QlAgent};

use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("ensemble methods need at least 2 tables, got {0}")]
    EnsembleTooSmall(usize),
    #[error("random subset size {0} exceeds ensemble size {1}")]
    SubsetTooLarge(usize, usize),
    #[error("beta schedule thresholds must be strictly increasing")]
    UnorderedThresholds,
    #[error("beta {0} outside [0, 1]")]
    BadBeta(f64),
    #[error("unknown beta schedule preset {0:?}")]
    UnknownPreset(String),
}

/// One sampled environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub terminal: bool,
}

/// `1 / visit_count` step size; the count must already include the current
/// visit, so the first update fully overwrites the initialization.
pub fn stepsize(visit_count_after_increment: u64) -> f64 {
    assert!(
        visit_count_after_increment >= 1,
        "step size needs a positive visit count"
    );
    1.0 / visit_count_after_increment as f64
}

/// Argmax with deterministic lowest-index tie-breaking.
pub fn select_greedy(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of an empty value vector");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmin with deterministic lowest-index tie-breaking.
pub fn select_argmin(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmin of an empty value vector");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Behavior policy used during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplorationPolicy {
    EpsGreedyLinear {
        eps_start: f64,
        eps_end: f64,
        decay_steps: u64,
    },
    Uniform,
}

impl ExplorationPolicy {
    /// Linearly decaying epsilon from 1 to 0.1 over 10000 steps, then constant.
    pub fn eps_greedy_default() -> Self {
        ExplorationPolicy::EpsGreedyLinear {
            eps_start: 1.0,
            eps_end: 0.1,
            decay_steps: 10_000,
        }
    }

    /// Exploration rate after `step` completed environment steps.
    pub fn epsilon(&self, step: u64) -> f64 {
        match *self {
            ExplorationPolicy::EpsGreedyLinear {
                eps_start,
                eps_end,
                decay_steps,
            } => {
                if decay_steps == 0 {
                    return eps_end;
                }
                let frac = step as f64 / decay_steps as f64;
                (eps_start - (eps_start - eps_end) * frac).max(eps_end)
            }
            ExplorationPolicy::Uniform => 1.0,
        }
    }
}

/// Draws an action: uniform with probability epsilon(step), greedy otherwise.
pub fn act(policy: &ExplorationPolicy, values: &[f64], step: u64, rng: &mut dyn RngCore) -> usize {
    match policy {
        ExplorationPolicy::Uniform => rng.gen_range(0..values.len()),
        ExplorationPolicy::EpsGreedyLinear { .. } => {
            if rng.gen::<f64>() < policy.epsilon(step) {
                rng.gen_range(0..values.len())
            } else {
                select_greedy(values)
            }
        }
    }
}

/// Scalar Q table with per-pair visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
}

impl QTable {
    /// Zero-initialized table; `shape[s]` is the action count of state `s`
    /// (zero for terminal states).
    pub fn zeros(shape: &[usize]) -> Self {
        QTable {
            values: shape.iter().map(|&n| vec![0.0; n]).collect(),
            counts: shape.iter().map(|&n| vec![0; n]).collect(),
        }
    }

    /// Increments the visit count of (s, a) and returns the resulting step
    /// size.
    pub fn bump(&mut self, s: usize, a: usize) -> f64 {
        self.counts[s][a] += 1;
        stepsize(self.counts[s][a])
    }

    pub fn shape(&self) -> Vec<usize> {
        self.values.iter().map(Vec::len).collect()
    }
}

/// Interface the harness drives: one update per environment step, action
/// values for behavior/evaluation, and optional per-pair sample variances.
pub trait Learner {
    fn update(&mut self, t: &Transition, rng: &mut dyn RngCore);

    /// Values the agent acts on; also reported as its Q estimates.
    fn values(&self, s: usize) -> Vec<f64>;

    /// Averaged sample variance at (s, a), for distributional learners.
    fn sample_variance(&self, _s: usize, _a: usize) -> Option<f64> {
        None
    }
}
