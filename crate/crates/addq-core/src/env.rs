//! The two tabular environments, each available both as an exact model (for
//! dynamic-programming oracles) and as a seeded sampler (for learning).
//!
//! * Two-sided bandit: a start state with three actions (left arm bank, right
//!   arm bank, or quit), each arm paying a Gaussian reward and terminating.
//! * 4x4 grid world: deterministic moves, stochastic rewards attached to the
//!   destination cell, a goal, a fake goal, and a high-variance region.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("state {0} out of range")]
    BadState(usize),
    #[error("action {1} invalid in state {0}")]
    BadAction(usize, usize),
    #[error("state {0} is terminal and has no transitions")]
    TerminalState(usize),
    #[error("invalid model: {0}")]
    BadModel(String),
}

/// Reward law attached to one transition branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardSpec {
    Point(f64),
    TwoPoint {
        v1: f64,
        p1: f64,
        v2: f64,
        p2: f64,
    },
    /// `sigma` is the standard deviation.
    Gaussian {
        mu: f64,
        sigma: f64,
    },
}

impl RewardSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardSpec::Point(v) => v,
            RewardSpec::TwoPoint { v1, p1, v2, p2 } => v1 * p1 + v2 * p2,
            RewardSpec::Gaussian { mu, .. } => mu,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardSpec::Point(v) => v,
            RewardSpec::TwoPoint { v1, p1, v2, .. } => {
                if rng.gen::<f64>() < p1 {
                    v1
                } else {
                    v2
                }
            }
            RewardSpec::Gaussian { mu, sigma } => {
                if sigma == 0.0 {
                    mu
                } else {
                    Normal::new(mu, sigma).expect("finite sigma").sample(rng)
                }
            }
        }
    }

    /// Finite atom decomposition, if the law is discrete.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            RewardSpec::Point(v) => Some(vec![(v, 1.0)]),
            RewardSpec::TwoPoint { v1, p1, v2, p2 } => Some(vec![(v1, p1), (v2, p2)]),
            RewardSpec::Gaussian { .. } => None,
        }
    }

    fn dump_fields(&self) -> (&'static str, String) {
        match *self {
            RewardSpec::Point(v) => ("point", format!("{v}")),
            RewardSpec::TwoPoint { v1, p1, v2, p2 } => {
                ("two_point", format!("{v1},{p1},{v2},{p2}"))
            }
            RewardSpec::Gaussian { mu, sigma } => ("gaussian", format!("{mu},{sigma}")),
        }
    }
}

/// One branch of a transition: probability, reward law, successor.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub reward: RewardSpec,
    pub next: usize,
}

/// Exact finite MDP: per-(state, action) branch lists plus terminal flags.
/// Terminal states carry no actions, their value is identically zero, and a
/// transition entering them ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    pub gamma: f64,
    pub terminal: Vec<bool>,
    /// `transitions[s][a]` is the branch list of (s, a); empty outer entry for
    /// terminal states.
    pub transitions: Vec<Vec<Vec<Branch>>>,
    /// Designated start state for episodic rollouts.
    pub start: usize,
}

impl TabularModel {
    pub fn n_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn n_actions(&self, s: usize) -> usize {
        self.transitions[s].len()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Iterator over non-terminal states.
    pub fn live_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(move |&s| !self.terminal[s])
    }

    /// Number of (state, action) pairs over non-terminal states.
    pub fn n_pairs(&self) -> usize {
        self.live_states().map(|s| self.n_actions(s)).sum()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(EnvError::BadModel(format!(
                "gamma {} outside (0, 1)",
                self.gamma
            )));
        }
        if self.terminal.len() != self.n_states() {
            return Err(EnvError::BadModel("terminal flag length mismatch".into()));
        }
        for s in 0..self.n_states() {
            if self.terminal[s] {
                if !self.transitions[s].is_empty() {
                    return Err(EnvError::BadModel(format!(
                        "terminal state {s} has actions"
                    )));
                }
                continue;
            }
            if self.transitions[s].is_empty() {
                return Err(EnvError::BadModel(format!(
                    "non-terminal state {s} has no actions"
                )));
            }
            for (a, branches) in self.transitions[s].iter().enumerate() {
                let total: f64 = branches.iter().map(|b| b.prob).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(EnvError::BadModel(format!(
                        "branch probabilities at ({s}, {a}) sum to {total}"
                    )));
                }
                for b in branches {
                    if b.next >= self.n_states() {
                        return Err(EnvError::BadModel(format!(
                            "branch at ({s}, {a}) targets unknown state {}",
                            b.next
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Draws one transition: a branch with its probability, then a reward from
    /// the branch's reward law. Returns `(reward, next_state, entered_terminal)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<(f64, usize, bool), EnvError> {
        if s >= self.n_states() {
            return Err(EnvError::BadState(s));
        }
        if self.terminal[s] {
            return Err(EnvError::TerminalState(s));
        }
        if a >= self.n_actions(s) {
            return Err(EnvError::BadAction(s, a));
        }
        let branches = &self.transitions[s][a];
        let branch = if branches.len() == 1 {
            &branches[0]
        } else {
            let mut u = rng.gen::<f64>();
            let mut chosen = &branches[branches.len() - 1];
            for b in branches {
                if u < b.prob {
                    chosen = b;
                    break;
                }
                u -= b.prob;
            }
            chosen
        };
        let r = branch.reward.sample(rng);
        Ok((r, branch.next, self.terminal[branch.next]))
    }

    /// Expected one-step reward of (s, a).
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.transitions[s][a]
            .iter()
            .map(|b| b.prob * b.reward.mean())
            .sum()
    }

    /// Serializes the model as a plain-text table, one row per transition
    /// branch: `s a prob reward_kind params s_next terminal`, tab-separated.
    pub fn dump(&self) -> String {
        let mut out = String::from("s\ta\tprob\treward_kind\tparams\ts_next\tterminal\n");
        for s in self.live_states() {
            for (a, branches) in self.transitions[s].iter().enumerate() {
                for b in branches {
                    let (kind, params) = b.reward.dump_fields();
                    let _ = writeln!(
                        out,
                        "{s}\t{a}\t{}\t{kind}\t{params}\t{}\t{}",
                        b.prob,
                        b.next,
                        u8::from(self.terminal[b.next])
                    );
                }
            }
        }
        out
    }
}

/// Parameters of the two-sided bandit. State indices: 0 = start, 1 = left arm
/// bank, 2 = right arm bank, 3 = terminal. Start-state actions: 0 = left,
/// 1 = right, 2 = down (quit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditSpec {
    pub k1: usize,
    pub k2: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma: f64,
}

pub const BANDIT_START: usize = 0;
pub const BANDIT_LEFT_STATE: usize = 1;
pub const BANDIT_RIGHT_STATE: usize = 2;
pub const BANDIT_TERMINAL: usize = 3;
pub const BANDIT_ACTION_LEFT: usize = 0;
pub const BANDIT_ACTION_RIGHT: usize = 1;
pub const BANDIT_ACTION_DOWN: usize = 2;

impl BanditSpec {
    /// The default parametrization with the left side's arm count and spread
    /// free: mu1 = -0.1, mu2 = 0.1, k2 = 5, sigma2 = 1, gamma = 0.9. The right
    /// side is the correct choice (gamma * mu2 = 0.09 beats 0 and -0.09).
    pub fn two_sided(k1: usize, sigma1: f64) -> Self {
        BanditSpec {
            k1,
            k2: 5,
            mu1: -0.1,
            mu2: 0.1,
            sigma1,
            sigma2: 1.0,
            gamma: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.k1 < 1 || self.k2 < 1 {
            return Err(EnvError::BadModel(
                "bandit needs at least one arm per side".into(),
            ));
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(EnvError::BadModel("negative sigma".into()));
        }
        Ok(())
    }
}

/// Builds the bandit MDP: the start state branches to the arm banks (reward
/// 0) or quits (reward 0, terminal); every arm pays a Gaussian reward and
/// terminates.
pub fn bandit_model(spec: &BanditSpec) -> Result<TabularModel, EnvError> {
    spec.validate()?;
    let zero = RewardSpec::Point(0.0);
    let start_actions = vec![
        vec![Branch {
            prob: 1.0,
            reward: zero,
            next: BANDIT_LEFT_STATE,
        }],
        vec![Branch {
            prob: 1.0,
            reward: zero,
            next: BANDIT_RIGHT_STATE,
        }],
        vec![Branch {
            prob: 1.0,
            reward: zero,
            next: BANDIT_TERMINAL,
        }],
    ];
    let arm = |mu: f64, sigma: f64| Branch {
        prob: 1.0,
        reward: RewardSpec::Gaussian { mu, sigma },
        next: BANDIT_TERMINAL,
    };
    let left_actions = (0..spec.k1)
        .map(|_| vec![arm(spec.mu1, spec.sigma1)])
        .collect();
    let right_actions = (0..spec.k2)
        .map(|_| vec![arm(spec.mu2, spec.sigma2)])
        .collect();
    let model = TabularModel {
        gamma: spec.gamma,
        terminal: vec![false, false, false, true],
        transitions: vec![start_actions, left_actions, right_actions, vec![]],
        start: BANDIT_START,
    };
    model.validate()?;
    Ok(model)
}

/// 4x4 grid world layout. Cell indices are row-major from the top-left:
///
/// ```text
///  F  1  2  S
///  4  5  6  7
///  8  9 10 11
/// 12  G 14 15
/// ```
///
/// F (fake goal) and G (goal) are terminal; the shaded high-variance region
/// is {10, 11, 14, 15}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridWorldSpec {
    pub step_cap: usize,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec { step_cap: 100 }
    }
}

pub const GRID_SIZE: usize = 4;
pub const GRID_STATES: usize = 16;
pub const GRID_START: usize = 3;
pub const GRID_GOAL: usize = 13;
pub const GRID_FAKE_GOAL: usize = 0;
pub const GRID_STOCHASTIC: [usize; 4] = [10, 11, 14, 15];
pub const GRID_GAMMA: f64 = 0.9;
/// Action indices, fixed for reproducibility.
pub const GRID_ACTIONS: [&str; 4] = ["up", "down", "left", "right"];

fn grid_is_stochastic(cell: usize) -> bool {
    GRID_STOCHASTIC.contains(&cell)
}

/// Reward law for entering (or bumping in place at) `cell`.
fn grid_reward(cell: usize) -> RewardSpec {
    if cell == GRID_GOAL {
        RewardSpec::Point(1.0)
    } else if cell == GRID_FAKE_GOAL {
        RewardSpec::Point(0.65)
    } else if grid_is_stochastic(cell) {
        RewardSpec::TwoPoint {
            v1: -2.1,
            p1: 0.5,
            v2: 2.0,
            p2: 0.5,
        }
    } else {
        RewardSpec::TwoPoint {
            v1: -0.05,
            p1: 0.5,
            v2: 0.05,
            p2: 0.5,
        }
    }
}

/// Destination of a deterministic move; moving off-grid leaves the state
/// unchanged.
pub fn grid_step(cell: usize, action: usize) -> usize {
    let (row, col) = (cell / GRID_SIZE, cell % GRID_SIZE);
    let (nr, nc) = match action {
        0 => (row.wrapping_sub(1), col), // up
        1 => (row + 1, col),             // down
        2 => (row, col.wrapping_sub(1)), // left
        3 => (row, col + 1),             // right
        _ => panic!("grid world has 4 actions, got {action}"),
    };
    if nr >= GRID_SIZE || nc >= GRID_SIZE {
        cell
    } else {
        nr * GRID_SIZE + nc
    }
}

/// Builds the grid-world MDP. Moves are deterministic; the sampled reward of
/// a transition is drawn from the reward law of the destination cell, with
/// bump-in-place transitions using the current cell's region.
pub fn gridworld_model(_spec: &GridWorldSpec) -> TabularModel {
    let mut transitions = Vec::with_capacity(GRID_STATES);
    let mut terminal = vec![false; GRID_STATES];
    terminal[GRID_GOAL] = true;
    terminal[GRID_FAKE_GOAL] = true;
    #[allow(clippy::needless_range_loop)]
    for s in 0..GRID_STATES {
        if terminal[s] {
            transitions.push(vec![]);
            continue;
        }
        let mut actions = Vec::with_capacity(4);
        for a in 0..4 {
            let dest = grid_step(s, a);
            let reward_cell = if dest == s { s } else { dest };
            actions.push(vec![Branch {
                prob: 1.0,
                reward: grid_reward(reward_cell),
                next: dest,
            }]);
        }
        transitions.push(actions);
    }
    let model = TabularModel {
        gamma: GRID_GAMMA,
        terminal,
        transitions,
        start: GRID_START,
    };
    model.validate().expect("fixed layout is well-formed");
    model
}

/// Rolls out `policy` from `start` until a terminal state or `step_cap`
/// steps; returns the visited (s, a, r, s') tuples.
pub fn episode_runner<R: Rng + ?Sized>(
    model: &TabularModel,
    policy: impl Fn(usize) -> usize,
    start: usize,
    step_cap: usize,
    rng: &mut R,
) -> Vec<(usize, usize, f64, usize)> {
    let mut trajectory = Vec::new();
    let mut s = start;
    for _ in 0..step_cap {
        if model.is_terminal(s) {
            break;
        }
        let a = policy(s);
        let (r, s_next, done) = model
            .sample_transition(s, a, rng)
            .expect("policy stays in range");
        trajectory.push((s, a, r, s_next));
        if done {
            break;
        }
        s = s_next;
    }
    trajectory
}
