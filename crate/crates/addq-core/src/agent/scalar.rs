//! Scalar learners: Q-learning and the two-table family (double, clipped,
//! weighted-double).

use rand::{Rng, RngCore};

use super::{select_argmin, select_greedy, Learner, QTable, Transition};

/// Plain Q-learning with 1/visit-count step sizes and zero bootstrap at
/// terminals.
#[derive(Debug, Clone)]
pub struct QlAgent {
    pub q: QTable,
    gamma: f64,
}

impl QlAgent {
    pub fn new(shape: &[usize], gamma: f64) -> Self {
        QlAgent {
            q: QTable::zeros(shape),
            gamma,
        }
    }
}

impl Learner for QlAgent {
    fn update(&mut self, t: &Transition, _rng: &mut dyn RngCore) {
        let bootstrap = if t.terminal {
            0.0
        } else {
            self.q.values[t.s_next][select_greedy(&self.q.values[t.s_next])]
        };
        let target = t.r + self.gamma * bootstrap;
        let alpha = self.q.bump(t.s, t.a);
        self.q.values[t.s][t.a] += alpha * (target - self.q.values[t.s][t.a]);
    }

    fn values(&self, s: usize) -> Vec<f64> {
        self.q.values[s].clone()
    }
}

/// Bootstrap rule of a two-table learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DoubleKind {
    /// The updated table picks the argmax, the other table evaluates it.
    Double,
    /// Evaluates the minimum of both tables at the updated table's argmax.
    Clipped,
    /// Gap-weighted interpolation between the Q and double-Q bootstraps:
    /// `w = |gap| / (c + |gap|)` with the gap measured in the evaluating
    /// table between the updated table's argmax and argmin actions.
    Weighted { c: f64 },
}

/// Computes the (undiscounted) bootstrap value at `s_next` for an update of
/// `own`, with `other` as the evaluating table.
pub fn double_bootstrap(own: &[f64], other: &[f64], kind: DoubleKind) -> f64 {
    let z_star = select_greedy(own);
    match kind {
        DoubleKind::Double => other[z_star],
        DoubleKind::Clipped => own[z_star].min(other[z_star]),
        DoubleKind::Weighted { c } => {
            let a_low = select_argmin(own);
            let gap = (other[z_star] - other[a_low]).abs();
            let w = gap / (c + gap);
            w * own[z_star] + (1.0 - w) * other[z_star]
        }
    }
}

/// Two-table learner: a fair coin picks the table to update each step.
#[derive(Debug, Clone)]
pub struct DoubleAgent {
    pub table_a: QTable,
    pub table_b: QTable,
    kind: DoubleKind,
    gamma: f64,
}

impl DoubleAgent {
    pub fn new(shape: &[usize], gamma: f64, kind: DoubleKind) -> Self {
        DoubleAgent {
            table_a: QTable::zeros(shape),
            table_b: QTable::zeros(shape),
            kind,
            gamma,
        }
    }

    /// Performs the update with an explicit coin outcome (`true` updates A);
    /// exposed so label-swap symmetry can be driven directly in tests.
    pub fn update_with_coin(&mut self, t: &Transition, update_a: bool) {
        let (own, other) = if update_a {
            (&mut self.table_a, &self.table_b)
        } else {
            (&mut self.table_b, &self.table_a)
        };
        let bootstrap = if t.terminal {
            0.0
        } else {
            double_bootstrap(&own.values[t.s_next], &other.values[t.s_next], self.kind)
        };
        let target = t.r + self.gamma * bootstrap;
        let alpha = own.bump(t.s, t.a);
        own.values[t.s][t.a] += alpha * (target - own.values[t.s][t.a]);
    }
}

impl Learner for DoubleAgent {
    fn update(&mut self, t: &Transition, rng: &mut dyn RngCore) {
        let update_a = rng.gen::<f64>() < 0.5;
        self.update_with_coin(t, update_a);
    }

    fn values(&self, s: usize) -> Vec<f64> {
        self.table_a.values[s]
            .iter()
            .zip(&self.table_b.values[s])
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}
