//! Ensemble estimators over K scalar tables: elementwise-minimum (Maxmin),
//! leave-one-out average (EBQL), and random-subset minimum with shared target
//! (REDQ).

use rand::{Rng, RngCore};

use super::{select_greedy, AgentError, Learner, QTable, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    /// One random table moves toward `max_a min_k Q_k(s', a)`.
    Maxmin,
    /// The chosen table's argmax is evaluated by the average of the others.
    Ebql,
    /// A random subset of `subset_size` tables forms the min-field target;
    /// every table moves toward it.
    Redq { subset_size: usize },
}

#[derive(Debug, Clone)]
pub struct EnsembleAgent {
    pub tables: Vec<QTable>,
    kind: EnsembleKind,
    gamma: f64,
}

impl EnsembleAgent {
    pub fn new(
        shape: &[usize],
        gamma: f64,
        ensembles: usize,
        kind: EnsembleKind,
    ) -> Result<Self, AgentError> {
        if ensembles < 2 {
            return Err(AgentError::EnsembleTooSmall(ensembles));
        }
        if let EnsembleKind::Redq { subset_size } = kind {
            if subset_size > ensembles {
                return Err(AgentError::SubsetTooLarge(subset_size, ensembles));
            }
            if subset_size == 0 {
                return Err(AgentError::SubsetTooLarge(0, ensembles));
            }
        }
        Ok(EnsembleAgent {
            tables: (0..ensembles).map(|_| QTable::zeros(shape)).collect(),
            kind,
            gamma,
        })
    }

    pub fn ensembles(&self) -> usize {
        self.tables.len()
    }

    /// `max_a min_{k in subset} Q_k(s, a)` over the given table indices.
    fn min_field_max(&self, subset: &[usize], s: usize) -> f64 {
        let n_actions = self.tables[0].values[s].len();
        (0..n_actions)
            .map(|a| {
                subset
                    .iter()
                    .map(|&k| self.tables[k].values[s][a])
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn move_table(&mut self, k: usize, t: &Transition, target: f64) {
        let table = &mut self.tables[k];
        let alpha = table.bump(t.s, t.a);
        table.values[t.s][t.a] += alpha * (target - table.values[t.s][t.a]);
    }
}

impl Learner for EnsembleAgent {
    fn update(&mut self, t: &Transition, rng: &mut dyn RngCore) {
        let n = self.ensembles();
        match self.kind {
            EnsembleKind::Maxmin => {
                let k = rng.gen_range(0..n);
                let bootstrap = if t.terminal {
                    0.0
                } else {
                    let all: Vec<usize> = (0..n).collect();
                    self.min_field_max(&all, t.s_next)
                };
                self.move_table(k, t, t.r + self.gamma * bootstrap);
            }
            EnsembleKind::Ebql => {
                let k = rng.gen_range(0..n);
                let bootstrap = if t.terminal {
                    0.0
                } else {
                    let a_star = select_greedy(&self.tables[k].values[t.s_next]);
                    let sum: f64 = (0..n)
                        .filter(|&j| j != k)
                        .map(|j| self.tables[j].values[t.s_next][a_star])
                        .sum();
                    sum / (n - 1) as f64
                };
                self.move_table(k, t, t.r + self.gamma * bootstrap);
            }
            EnsembleKind::Redq { subset_size } => {
                let bootstrap = if t.terminal {
                    // the subset draw is skipped; no bootstrap to form
                    0.0
                } else {
                    let mut indices: Vec<usize> = (0..n).collect();
                    // partial Fisher-Yates for a uniform subset
                    for i in 0..subset_size {
                        let j = rng.gen_range(i..n);
                        indices.swap(i, j);
                    }
                    self.min_field_max(&indices[..subset_size], t.s_next)
                };
                let target = t.r + self.gamma * bootstrap;
                for k in 0..n {
                    self.move_table(k, t, target);
                }
            }
        }
    }

    fn values(&self, s: usize) -> Vec<f64> {
        let n_actions = self.tables[0].values[s].len();
        match self.kind {
            // Maxmin acts greedily on the min-field it bootstraps from
            EnsembleKind::Maxmin => {
                let all: Vec<usize> = (0..self.ensembles()).collect();
                (0..n_actions)
                    .map(|a| {
                        all.iter()
                            .map(|&k| self.tables[k].values[s][a])
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            }
            // EBQL/REDQ act on the ensemble average
            _ => (0..n_actions)
                .map(|a| {
                    self.tables.iter().map(|t| t.values[s][a]).sum::<f64>()
                        / self.ensembles() as f64
                })
                .collect(),
        }
    }
}
