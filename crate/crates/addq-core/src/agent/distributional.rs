//! Distributional learners over return-distribution tables: single-table
//! distributional Q-learning, distributional double Q-learning, and the
//! adaptive mixture of the two (ADDQ) driven by relative sample variances.

use rand::{Rng, RngCore};

use super::{select_greedy, AgentError, Learner, Transition};
use crate::dist::{mixture, project_quantile, AtomList, QuantileDist, ReturnDist, Support};

/// Which parametrization a return table stores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Repr {
    Categorical(Support),
    Quantile(usize),
}

impl Repr {
    /// Initial distribution: a point mass at zero.
    pub fn init(&self) -> ReturnDist {
        match *self {
            Repr::Categorical(s) => ReturnDist::Categorical(s.delta(0.0)),
            Repr::Quantile(m) => ReturnDist::Quantile(QuantileDist::point(0.0, m)),
        }
    }

    /// Projects a raw atom list back onto the parametrization.
    pub fn project(&self, atoms: &AtomList) -> ReturnDist {
        match *self {
            Repr::Categorical(s) => ReturnDist::Categorical(s.project(atoms)),
            Repr::Quantile(m) => ReturnDist::Quantile(project_quantile(atoms, m)),
        }
    }
}

/// Per-(state, action) return distributions plus visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    pub dists: Vec<Vec<ReturnDist>>,
    pub counts: Vec<Vec<u64>>,
    repr: Repr,
}

impl ReturnTable {
    pub fn new(shape: &[usize], repr: Repr) -> Self {
        ReturnTable {
            dists: shape.iter().map(|&n| vec![repr.init(); n]).collect(),
            counts: shape.iter().map(|&n| vec![0; n]).collect(),
            repr,
        }
    }

    pub fn repr(&self) -> Repr {
        self.repr
    }

    pub fn means(&self, s: usize) -> Vec<f64> {
        self.dists[s].iter().map(ReturnDist::mean).collect()
    }

    /// Moves (s, a) toward `target` by the measure mixture
    /// `(1 - alpha) * old + alpha * target`. The categorical mixture stays in
    /// the parametrization; the quantile mixture is re-projected onto the m
    /// equal-weight atoms.
    pub fn blend(&mut self, s: usize, a: usize, target: &ReturnDist, alpha: f64) {
        let old = &self.dists[s][a];
        let updated = match (old, target) {
            (ReturnDist::Categorical(o), ReturnDist::Categorical(t)) => {
                ReturnDist::Categorical(o.mix(t, 1.0 - alpha).expect("shared support"))
            }
            (ReturnDist::Quantile(o), ReturnDist::Quantile(t)) => {
                let atoms = mixture(
                    &ReturnDist::Quantile(o.clone()),
                    &ReturnDist::Quantile(t.clone()),
                    1.0 - alpha,
                )
                .expect("same representation");
                ReturnDist::Quantile(project_quantile(&atoms, o.len()))
            }
            _ => unreachable!("table representation is homogeneous"),
        };
        self.dists[s][a] = updated;
    }

    /// Increments the visit count at (s, a) and returns the step size.
    pub fn bump(&mut self, s: usize, a: usize) -> f64 {
        self.counts[s][a] += 1;
        super::stepsize(self.counts[s][a])
    }
}

/// Piecewise-constant map from relative sample variance to the interpolation
/// weight beta. Each segment covers values up to `upper` (inclusive or
/// exclusive); values beyond the last segment get `final_beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSchedule {
    segments: Vec<BetaSegment>,
    final_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSegment {
    pub upper: f64,
    pub inclusive: bool,
    pub beta: f64,
}

impl BetaSchedule {
    pub fn new(segments: Vec<BetaSegment>, final_beta: f64) -> Result<Self, AgentError> {
        if segments.iter().any(|s| s.upper.is_nan()) {
            return Err(AgentError::UnorderedThresholds);
        }
        for w in segments.windows(2) {
            if w[0].upper >= w[1].upper {
                return Err(AgentError::UnorderedThresholds);
            }
        }
        for beta in segments.iter().map(|s| s.beta).chain([final_beta]) {
            if !(0.0..=1.0).contains(&beta) {
                return Err(AgentError::BadBeta(beta));
            }
        }
        Ok(BetaSchedule {
            segments,
            final_beta,
        })
    }

    /// A constant weight (beta = 1 recovers distributional Q-learning,
    /// beta = 0 distributional double Q-learning).
    pub fn constant(beta: f64) -> Result<Self, AgentError> {
        Self::new(vec![], beta)
    }

    pub fn lookup(&self, s2_rel: f64) -> f64 {
        for seg in &self.segments {
            if s2_rel < seg.upper || (seg.inclusive && s2_rel == seg.upper) {
                return seg.beta;
            }
        }
        self.final_beta
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "n3", "a3", "c3", "ltn3", "lta3", "ltc3", "rtn3", "rta3", "rtc3", "n5", "a5", "c5",
            "ltn5", "lta5", "ltc5", "rtn5", "rta5", "rtc5",
        ]
    }

    /// The named schedules. Three-interval presets assign both boundary
    /// values to the middle bucket; five-interval presets close the outer
    /// buckets and the middle bucket.
    pub fn preset(name: &str) -> Result<Self, AgentError> {
        fn three(t1: f64, t2: f64, lo: f64, mid: f64, hi: f64) -> BetaSchedule {
            BetaSchedule::new(
                vec![
                    BetaSegment {
                        upper: t1,
                        inclusive: false,
                        beta: lo,
                    },
                    BetaSegment {
                        upper: t2,
                        inclusive: true,
                        beta: mid,
                    },
                ],
                hi,
            )
            .expect("preset data is valid")
        }
        fn five(t: [f64; 4], betas: [f64; 5]) -> BetaSchedule {
            BetaSchedule::new(
                vec![
                    BetaSegment {
                        upper: t[0],
                        inclusive: true,
                        beta: betas[0],
                    },
                    BetaSegment {
                        upper: t[1],
                        inclusive: false,
                        beta: betas[1],
                    },
                    BetaSegment {
                        upper: t[2],
                        inclusive: true,
                        beta: betas[2],
                    },
                    BetaSegment {
                        upper: t[3],
                        inclusive: false,
                        beta: betas[3],
                    },
                ],
                betas[4],
            )
            .expect("preset data is valid")
        }
        let soft = [1.0, 0.75, 0.5, 0.25, 0.0];
        let cons = [0.7, 0.6, 0.5, 0.4, 0.3];
        Ok(match name {
            "n3" => three(0.75, 1.25, 0.75, 0.5, 0.25),
            "ltn3" => three(1.25, 1.75, 0.75, 0.5, 0.25),
            "rtn3" => three(0.25, 0.75, 0.75, 0.5, 0.25),
            "a3" => three(0.99, 1.01, 1.0, 0.5, 0.0),
            "lta3" => three(1.49, 1.51, 1.0, 0.5, 0.0),
            "rta3" => three(0.49, 0.51, 1.0, 0.5, 0.0),
            "c3" => three(0.6, 1.4, 0.6, 0.5, 0.4),
            "ltc3" => three(1.1, 1.9, 0.6, 0.5, 0.4),
            "rtc3" => three(0.1, 0.9, 0.6, 0.5, 0.4),
            "n5" => five([0.25, 0.75, 1.25, 1.75], soft),
            "ltn5" => five([0.75, 1.25, 1.75, 2.25], soft),
            "rtn5" => five([-0.25, 0.25, 0.75, 1.25], soft),
            "a5" => five([0.99, 0.995, 1.005, 1.01], soft),
            "lta5" => five([1.49, 1.495, 1.505, 1.51], soft),
            "rta5" => five([0.49, 0.495, 0.505, 0.51], soft),
            "c5" => five([0.1, 0.7, 1.3, 1.9], cons),
            "ltc5" => five([0.6, 1.2, 1.8, 2.4], cons),
            "rtc5" => five([-0.4, 0.2, 0.8, 1.4], cons),
            other => return Err(AgentError::UnknownPreset(other.to_string())),
        })
    }
}

/// Relative sample variances at state `s`: the A/B-averaged variance of each
/// action divided by the mean such variance over all actions. A zero mean
/// variance (no spread information anywhere, e.g. at initialization) yields
/// all ones, putting every action in the middle bucket.
pub fn relative_variance(table_a: &ReturnTable, table_b: &ReturnTable, s: usize) -> Vec<f64> {
    let n = table_a.dists[s].len();
    let per_action: Vec<f64> = (0..n)
        .map(|a| {
            0.5 * (table_a.dists[s][a].sample_variance() + table_b.dists[s][a].sample_variance())
        })
        .collect();
    let mean = per_action.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return vec![1.0; n];
    }
    per_action.iter().map(|v| v / mean).collect()
}

/// How a double distributional learner picks its interpolation weight.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaPolicy {
    Constant(f64),
    Adaptive(BetaSchedule),
}

impl BetaPolicy {
    fn beta_at(
        &self,
        table_a: &ReturnTable,
        table_b: &ReturnTable,
        s_next: usize,
        a_star: usize,
    ) -> f64 {
        match self {
            BetaPolicy::Constant(beta) => *beta,
            BetaPolicy::Adaptive(schedule) => {
                schedule.lookup(relative_variance(table_a, table_b, s_next)[a_star])
            }
        }
    }
}

/// Target of a single-table distributional Q-learning update: the projected
/// pushforward of the greedy next-state distribution (a point mass at zero
/// beyond terminals).
pub fn dist_ql_target(table: &ReturnTable, t: &Transition, gamma: f64) -> ReturnDist {
    if t.terminal {
        return table.repr.project(&AtomList::point(t.r));
    }
    let a_star = select_greedy(&table.means(t.s_next));
    table
        .repr
        .project(&table.dists[t.s_next][a_star].pushforward(t.r, gamma))
}

/// Target of a two-table update: the updated table's greedy action selects
/// the next-state pair, the weight `beta` mixes own and other distributions
/// there, and the mixture is pushed forward and projected. Returns the target
/// and the beta actually consumed (none at terminals).
pub fn double_dist_target(
    own: &ReturnTable,
    other: &ReturnTable,
    t: &Transition,
    gamma: f64,
    beta: f64,
) -> ReturnDist {
    if t.terminal {
        return own.repr.project(&AtomList::point(t.r));
    }
    let a_star = select_greedy(&own.means(t.s_next));
    let nu = mixture(
        &own.dists[t.s_next][a_star],
        &other.dists[t.s_next][a_star],
        beta,
    )
    .expect("tables share one representation");
    own.repr.project(&nu.pushforward(t.r, gamma))
}

/// Single-table distributional Q-learning.
#[derive(Debug, Clone)]
pub struct DistAgent {
    pub table: ReturnTable,
    gamma: f64,
}

impl DistAgent {
    pub fn new(shape: &[usize], repr: Repr, gamma: f64) -> Self {
        DistAgent {
            table: ReturnTable::new(shape, repr),
            gamma,
        }
    }
}

impl Learner for DistAgent {
    fn update(&mut self, t: &Transition, _rng: &mut dyn RngCore) {
        let target = dist_ql_target(&self.table, t, self.gamma);
        let alpha = self.table.bump(t.s, t.a);
        self.table.blend(t.s, t.a, &target, alpha);
    }

    fn values(&self, s: usize) -> Vec<f64> {
        self.table.means(s)
    }

    fn sample_variance(&self, s: usize, a: usize) -> Option<f64> {
        Some(self.table.dists[s][a].sample_variance())
    }
}

/// Two-table distributional learner: a fair coin picks the table to update;
/// the weight beta interpolates between the Q-style (own-table) and double
/// Q-style (other-table) bootstrap distributions. A constant beta of 1 or 0
/// recovers distributional QL or DQL; the adaptive policy is ADDQ.
///
/// Beta is computed from the pre-update tables at the next state's greedy
/// action. Because the relative variance averages both tables, an A-update
/// and a B-update at the same (s', a*) consume the same beta.
#[derive(Debug, Clone)]
pub struct DistDoubleAgent {
    pub table_a: ReturnTable,
    pub table_b: ReturnTable,
    beta: BetaPolicy,
    gamma: f64,
}

impl DistDoubleAgent {
    pub fn new(shape: &[usize], repr: Repr, gamma: f64, beta: BetaPolicy) -> Self {
        DistDoubleAgent {
            table_a: ReturnTable::new(shape, repr),
            table_b: ReturnTable::new(shape, repr),
            beta,
            gamma,
        }
    }

    /// ADDQ with the named beta schedule.
    pub fn addq(shape: &[usize], repr: Repr, gamma: f64, schedule: BetaSchedule) -> Self {
        Self::new(shape, repr, gamma, BetaPolicy::Adaptive(schedule))
    }

    /// Distributional double Q-learning (constant beta = 0).
    pub fn dist_dql(shape: &[usize], repr: Repr, gamma: f64) -> Self {
        Self::new(shape, repr, gamma, BetaPolicy::Constant(0.0))
    }

    /// The beta an update would consume for next state `s_next` with greedy
    /// action `a_star`, from the current (pre-update) tables.
    pub fn beta_at(&self, s_next: usize, a_star: usize) -> f64 {
        self.beta
            .beta_at(&self.table_a, &self.table_b, s_next, a_star)
    }

    /// Label-swapped copy (A and B exchanged), for symmetry checks.
    pub fn swapped(&self) -> Self {
        DistDoubleAgent {
            table_a: self.table_b.clone(),
            table_b: self.table_a.clone(),
            beta: self.beta.clone(),
            gamma: self.gamma,
        }
    }

    /// Performs the update with an explicit coin outcome (`true` updates A).
    pub fn update_with_coin(&mut self, t: &Transition, update_a: bool) {
        let (own, other) = if update_a {
            (&self.table_a, &self.table_b)
        } else {
            (&self.table_b, &self.table_a)
        };
        let target = if t.terminal {
            own.repr.project(&AtomList::point(t.r))
        } else {
            let a_star = select_greedy(&own.means(t.s_next));
            let beta = self
                .beta
                .beta_at(&self.table_a, &self.table_b, t.s_next, a_star);
            double_dist_target(own, other, t, self.gamma, beta)
        };
        let own = if update_a {
            &mut self.table_a
        } else {
            &mut self.table_b
        };
        let alpha = own.bump(t.s, t.a);
        own.blend(t.s, t.a, &target, alpha);
    }
}

impl Learner for DistDoubleAgent {
    fn update(&mut self, t: &Transition, rng: &mut dyn RngCore) {
        let update_a = rng.gen::<f64>() < 0.5;
        self.update_with_coin(t, update_a);
    }

    fn values(&self, s: usize) -> Vec<f64> {
        self.table_a
            .means(s)
            .iter()
            .zip(self.table_b.means(s))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    fn sample_variance(&self, s: usize, a: usize) -> Option<f64> {
        Some(
            0.5 * (self.table_a.dists[s][a].sample_variance()
                + self.table_b.dists[s][a].sample_variance()),
        )
    }
}
