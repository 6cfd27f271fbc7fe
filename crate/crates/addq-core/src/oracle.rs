//! Exact ground truth for bias measurement: value iteration for the optimal
//! Q function, policy evaluation by direct linear solve, projected categorical
//! dynamic programming for the return-distribution fixed point, and bias
//! reports against these oracles.

use std::fmt::Write as _;
use thiserror::Error;

use crate::agent::select_greedy;
use crate::dist::{cramer_distance_dist, AtomList, CategoricalDist, ReturnDist, Support};
use crate::env::TabularModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("value iteration failed to converge within {0} sweeps (bug guard)")]
    NoConvergence(usize),
    #[error("categorical dynamic programming requires finite reward laws, found a Gaussian at ({0}, {1})")]
    ContinuousReward(usize, usize),
    #[error("shape mismatch between estimate and oracle")]
    ShapeMismatch,
    #[error("policy evaluation system is singular")]
    SingularSystem,
}

const MAX_SWEEPS: usize = 1_000_000;

/// Result of value iteration: the Q table plus the per-sweep sup-norm
/// residuals (monotone non-increasing by contraction).
#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub q: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Iterates the Bellman optimality backup until the sup-norm change drops
/// below `tol * (1 - gamma) / gamma`, which guarantees the returned table is
/// within `tol` of the fixed point. Terminal states stay at zero.
pub fn value_iteration(
    model: &TabularModel,
    tol: f64,
) -> Result<ValueIterationResult, OracleError> {
    let gamma = model.gamma;
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut q: Vec<Vec<f64>> = (0..model.n_states())
        .map(|s| vec![0.0; model.n_actions(s)])
        .collect();
    let mut residuals = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut next = q.clone();
        let mut delta = 0.0f64;
        for s in model.live_states() {
            for a in 0..model.n_actions(s) {
                let mut value = 0.0;
                for b in &model.transitions[s][a] {
                    let bootstrap = if model.is_terminal(b.next) {
                        0.0
                    } else {
                        q[b.next].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    };
                    value += b.prob * (b.reward.mean() + gamma * bootstrap);
                }
                delta = delta.max((value - q[s][a]).abs());
                next[s][a] = value;
            }
        }
        q = next;
        residuals.push(delta);
        if delta < threshold {
            return Ok(ValueIterationResult { q, residuals });
        }
    }
    Err(OracleError::NoConvergence(MAX_SWEEPS))
}

/// Greedy action per state (lowest index on ties); terminal states get 0.
pub fn greedy_policy(q: &[Vec<f64>]) -> Vec<usize> {
    q.iter()
        .map(|row| {
            if row.is_empty() {
                0
            } else {
                select_greedy(row)
            }
        })
        .collect()
}

/// Per-state sets of actions within `tie_tol` of the state's maximum.
pub fn greedy_sets(q: &[Vec<f64>], tie_tol: f64) -> Vec<Vec<usize>> {
    q.iter()
        .map(|row| {
            if row.is_empty() {
                return vec![];
            }
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter()
                .enumerate()
                .filter(|(_, &v)| best - v <= tie_tol)
                .map(|(a, _)| a)
                .collect()
        })
        .collect()
}

/// Exact policy evaluation: solves `(I - gamma * P_pi) v = r_pi` by Gaussian
/// elimination and backs Q(s, a) out with one expectation step. Independent
/// of the value-iteration path.
#[allow(clippy::needless_range_loop)]
pub fn policy_evaluation(
    model: &TabularModel,
    policy: &[usize],
) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = model.n_states();
    let gamma = model.gamma;
    // build the linear system over all states; terminal rows pin v = 0
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        a[s][s] = 1.0;
        if model.is_terminal(s) {
            continue;
        }
        let action = policy[s];
        for b in &model.transitions[s][action] {
            rhs[s] += b.prob * b.reward.mean();
            if !model.is_terminal(b.next) {
                a[s][b.next] -= gamma * b.prob;
            }
        }
    }
    let v = solve_linear(a, rhs)?;
    let mut q: Vec<Vec<f64>> = (0..n).map(|s| vec![0.0; model.n_actions(s)]).collect();
    for s in model.live_states() {
        for action in 0..model.n_actions(s) {
            q[s][action] = model.transitions[s][action]
                .iter()
                .map(|b| {
                    b.prob
                        * (b.reward.mean()
                            + if model.is_terminal(b.next) {
                                0.0
                            } else {
                                gamma * v[b.next]
                            })
                })
                .sum();
        }
    }
    Ok(q)
}

#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .ok_or(OracleError::SingularSystem)?;
        if a[pivot][col].abs() < 1e-12 {
            return Err(OracleError::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Result of projected categorical dynamic programming under a fixed policy.
#[derive(Debug, Clone)]
pub struct CategoricalFixedPoint {
    pub table: Vec<Vec<CategoricalDist>>,
    /// Sup-Cramér distance between consecutive sweeps.
    pub sweep_distances: Vec<f64>,
}

/// Iterates the projected distributional backup `eta <- Pi_C T^pi eta` until
/// the sup-Cramér change drops below `tol`. Reward laws must be finite
/// (Gaussian rewards are rejected); terminal successors contribute the
/// projected point mass at the reward.
pub fn categorical_fixed_point(
    model: &TabularModel,
    policy: &[usize],
    support: Support,
    tol: f64,
) -> Result<CategoricalFixedPoint, OracleError> {
    for s in model.live_states() {
        for a in 0..model.n_actions(s) {
            for b in &model.transitions[s][a] {
                if b.reward.atoms().is_none() {
                    return Err(OracleError::ContinuousReward(s, a));
                }
            }
        }
    }
    let gamma = model.gamma;
    let mut table: Vec<Vec<CategoricalDist>> = (0..model.n_states())
        .map(|s| vec![support.delta(0.0); model.n_actions(s)])
        .collect();
    let mut sweep_distances = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut next = table.clone();
        let mut delta = 0.0f64;
        for s in model.live_states() {
            for a in 0..model.n_actions(s) {
                let mut weights = vec![0.0; support.len()];
                for b in &model.transitions[s][a] {
                    for (r, w_r) in b.reward.atoms().expect("checked finite above") {
                        let source = if model.is_terminal(b.next) {
                            AtomList::point(r)
                        } else {
                            table[b.next][policy[b.next]].pushforward(r, gamma)
                        };
                        let projected = support.project(&source);
                        for (i, w) in projected.weights().iter().enumerate() {
                            weights[i] += b.prob * w_r * w;
                        }
                    }
                }
                let dist = CategoricalDist::new(support, weights);
                delta = delta.max(cramer_distance_dist(
                    &ReturnDist::Categorical(dist.clone()),
                    &ReturnDist::Categorical(table[s][a].clone()),
                ));
                next[s][a] = dist;
            }
        }
        table = next;
        sweep_distances.push(delta);
        if delta < tol {
            return Ok(CategoricalFixedPoint {
                table,
                sweep_distances,
            });
        }
    }
    Err(OracleError::NoConvergence(MAX_SWEEPS))
}

/// Per-pair bias of an estimate against an oracle Q table, its summed
/// absolute value, and per-state greedy agreement (the estimate's greedy
/// action lies in the oracle's greedy set; exact oracle ties count).
#[derive(Debug, Clone)]
pub struct BiasReport {
    pub bias: Vec<Vec<f64>>,
    pub summed_abs_bias: f64,
    pub greedy_agreement: Vec<bool>,
}

/// Tie tolerance for oracle greedy sets, matched to the value-iteration
/// precision used throughout.
pub const GREEDY_TIE_TOL: f64 = 1e-9;

pub fn bias_report(q_est: &[Vec<f64>], q_star: &[Vec<f64>]) -> Result<BiasReport, OracleError> {
    if q_est.len() != q_star.len() || q_est.iter().zip(q_star).any(|(a, b)| a.len() != b.len()) {
        return Err(OracleError::ShapeMismatch);
    }
    let bias: Vec<Vec<f64>> = q_est
        .iter()
        .zip(q_star)
        .map(|(est, star)| est.iter().zip(star).map(|(e, s)| e - s).collect())
        .collect();
    let summed_abs_bias = bias.iter().flatten().map(|b: &f64| b.abs()).sum();
    let oracle_sets = greedy_sets(q_star, GREEDY_TIE_TOL);
    let greedy_agreement = q_est
        .iter()
        .zip(&oracle_sets)
        .map(|(est, set)| {
            if est.is_empty() {
                true
            } else {
                set.contains(&select_greedy(est))
            }
        })
        .collect();
    Ok(BiasReport {
        bias,
        summed_abs_bias,
        greedy_agreement,
    })
}

/// Serializes a Q table as tab-separated `state action value` rows with 17
/// significant digits, for golden-file pinning.
pub fn q_table_tsv(q: &[Vec<f64>]) -> String {
    let mut out = String::from("state\taction\tvalue\n");
    for (s, row) in q.iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            let _ = writeln!(out, "{s}\t{a}\t{v:.16e}");
        }
    }
    out
}
