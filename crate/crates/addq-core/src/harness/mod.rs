//! Experiment orchestration: seeded learning loops with periodic frozen-greedy
//! evaluation, CSV emission, and cross-seed aggregation.
//!
//! Determinism contract: (config, seed) fully determines every output byte.
//! The learning loop draws from `stream(seed, TAG_LEARN, 0)`; each evaluation
//! point draws from its own `stream(seed, TAG_EVAL, step)` so rollouts never
//! disturb the learning stream or the learner state.

mod config;

pub use config::{
    AlgorithmConfig, AlgorithmSpec, ConfigError, EnvOnlyConfig, EnvironmentConfig,
    ExperimentConfig, ExperimentSection, ExplorationConfig, RepresentationConfig,
};

use std::fmt::Write as _;

use crate::agent::{act, select_greedy, ExplorationPolicy, Learner, Transition};
use crate::env::TabularModel;
use crate::oracle::{greedy_sets, value_iteration, GREEDY_TIE_TOL};
use crate::seeding::{stream, TAG_EVAL, TAG_LEARN};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("oracle error: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("environment error: {0}")]
    Env(#[from] crate::env::EnvError),
    #[error("records are ragged: {0}")]
    Ragged(String),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
}

/// One evaluation row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: u64,
    pub eval_return: f64,
    pub correct_action: u8,
    pub summed_abs_bias: f64,
    /// Q estimate per live (state, action) pair in lexicographic order.
    pub q: Vec<f64>,
    /// Averaged sample variance per pair; present for distributional runs.
    pub s2: Option<Vec<f64>>,
    /// `q - q_star` per pair.
    pub bias: Vec<f64>,
}

/// Time-indexed metrics of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

/// A validated, oracle-equipped experiment ready to run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: TabularModel,
    pub algorithm: AlgorithmSpec,
    pub exploration: ExplorationPolicy,
    pub step_cap: usize,
    pub eval_horizon: usize,
    pub q_star: Vec<Vec<f64>>,
    pub oracle_greedy_sets: Vec<Vec<usize>>,
    /// Live (state, action) pairs in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, HarnessError> {
        if config.experiment.eval_every == 0 {
            return Err(ConfigError::Invalid("eval_every must be at least 1".into()).into());
        }
        if config.experiment.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be non-empty".into()).into());
        }
        let (model, step_cap) = config.environment.build()?;
        let algorithm = AlgorithmSpec::resolve(&config.algorithm, &config.representation)?;
        let exploration = config.exploration.policy()?;
        let eval_horizon = config
            .experiment
            .eval_horizon
            .unwrap_or_else(|| config.environment.default_eval_horizon());
        let q_star = value_iteration(&model, 1e-10)?.q;
        let oracle_greedy_sets = greedy_sets(&q_star, GREEDY_TIE_TOL);
        let pairs = model
            .live_states()
            .flat_map(|s| (0..model.n_actions(s)).map(move |a| (s, a)))
            .collect();
        Ok(Experiment {
            config,
            model,
            algorithm,
            exploration,
            step_cap,
            eval_horizon,
            q_star,
            oracle_greedy_sets,
            pairs,
        })
    }

    fn shape(&self) -> Vec<usize> {
        (0..self.model.n_states())
            .map(|s| self.model.n_actions(s))
            .collect()
    }

    /// Runs one seed deterministically.
    pub fn run_seed(&self, seed: u64) -> Result<RunRecord, HarnessError> {
        let mut learner = self.algorithm.build(&self.shape(), self.model.gamma)?;
        let mut rng = stream(seed, TAG_LEARN, 0);
        let total = self.config.experiment.total_steps;
        let every = self.config.experiment.eval_every;
        let mut rows = Vec::with_capacity((total / every + 1) as usize);
        rows.push(self.evaluate(learner.as_ref(), seed, 0)?);

        let mut state = self.model.start;
        let mut episode_steps = 0usize;
        for t in 0..total {
            let values = learner.values(state);
            let a = act(&self.exploration, &values, t, &mut rng);
            let (r, s_next, terminal) = self.model.sample_transition(state, a, &mut rng)?;
            learner.update(
                &Transition {
                    s: state,
                    a,
                    r,
                    s_next,
                    terminal,
                },
                &mut rng,
            );
            episode_steps += 1;
            if terminal || episode_steps >= self.step_cap {
                state = self.model.start;
                episode_steps = 0;
            } else {
                state = s_next;
            }
            if (t + 1) % every == 0 {
                rows.push(self.evaluate(learner.as_ref(), seed, t + 1)?);
            }
        }
        Ok(RunRecord { seed, rows })
    }

    /// Runs all configured seeds sequentially, in seed order.
    pub fn run_all(&self) -> Result<Vec<RunRecord>, HarnessError> {
        self.config
            .experiment
            .seeds
            .iter()
            .map(|&seed| self.run_seed(seed))
            .collect()
    }

    /// Frozen-greedy evaluation: a greedy rollout of `eval_horizon` steps on
    /// a dedicated stream, plus bias columns against the oracle.
    fn evaluate(
        &self,
        learner: &dyn Learner,
        seed: u64,
        step: u64,
    ) -> Result<EvalRow, HarnessError> {
        let mut rng = stream(seed, TAG_EVAL, step);
        let mut eval_return = 0.0;
        let mut s = self.model.start;
        for _ in 0..self.eval_horizon {
            if self.model.is_terminal(s) {
                break;
            }
            let a = select_greedy(&learner.values(s));
            let (r, s_next, terminal) = self.model.sample_transition(s, a, &mut rng)?;
            eval_return += r;
            if terminal {
                break;
            }
            s = s_next;
        }

        let start = self.model.start;
        let greedy_start = select_greedy(&learner.values(start));
        let correct_action = u8::from(self.oracle_greedy_sets[start].contains(&greedy_start));

        let mut q = Vec::with_capacity(self.pairs.len());
        let mut bias = Vec::with_capacity(self.pairs.len());
        let mut s2 = self.algorithm.distributional().then(Vec::new);
        let mut summed_abs_bias = 0.0;
        for &(s, a) in &self.pairs {
            let estimate = learner.values(s)[a];
            let b = estimate - self.q_star[s][a];
            summed_abs_bias += b.abs();
            q.push(estimate);
            bias.push(b);
            if let Some(v) = s2.as_mut() {
                v.push(
                    learner
                        .sample_variance(s, a)
                        .expect("distributional learner"),
                );
            }
        }
        Ok(EvalRow {
            step,
            eval_return,
            correct_action,
            summed_abs_bias,
            q,
            s2,
            bias,
        })
    }

    /// Column names after `step,seed`: the scalar metrics, then a triplet
    /// (pair for scalar runs) per live (state, action).
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![
            "eval_return".to_string(),
            "correct_action".into(),
            "summed_abs_bias".into(),
        ];
        for &(s, a) in &self.pairs {
            names.push(format!("q_{s}_{a}"));
            if self.algorithm.distributional() {
                names.push(format!("s2_{s}_{a}"));
            }
            names.push(format!("bias_{s}_{a}"));
        }
        names
    }

    pub fn csv_header(&self) -> String {
        let mut header = String::from("step,seed");
        for name in self.column_names() {
            header.push(',');
            header.push_str(&name);
        }
        header.push('\n');
        header
    }

    /// Per-seed CSV: integers plain, floats at 9 significant digits.
    pub fn record_to_csv(&self, record: &RunRecord) -> String {
        let mut out = self.csv_header();
        for row in &record.rows {
            let _ = write!(
                out,
                "{},{},{}",
                row.step,
                record.seed,
                fmt_float(row.eval_return)
            );
            let _ = write!(out, ",{}", row.correct_action);
            let _ = write!(out, ",{}", fmt_float(row.summed_abs_bias));
            for (i, _) in self.pairs.iter().enumerate() {
                let _ = write!(out, ",{}", fmt_float(row.q[i]));
                if let Some(s2) = &row.s2 {
                    let _ = write!(out, ",{}", fmt_float(s2[i]));
                }
                let _ = write!(out, ",{}", fmt_float(row.bias[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// The ensemble/weighted comparison grid run by the `compare` command:
/// Maxmin with 2, 4, 6, 8 ensembles; EBQL with 3, 7, 10, 15; REDQ with 3 and
/// 5 ensembles at subset sizes 1 and 2; weighted double Q-learning at c = 10.
/// Returns (label, algorithm section) pairs.
pub fn comparison_grid() -> Vec<(String, AlgorithmConfig)> {
    let algo = |name: &str| AlgorithmConfig {
        name: name.to_string(),
        beta_schedule: None,
        constant_beta: None,
        ensembles: None,
        subset_size: None,
        c: None,
    };
    let mut grid = Vec::new();
    for k in [2usize, 4, 6, 8] {
        let mut a = algo("maxmin");
        a.ensembles = Some(k);
        grid.push((format!("maxmin_{k}"), a));
    }
    for k in [3usize, 7, 10, 15] {
        let mut a = algo("ebql");
        a.ensembles = Some(k);
        grid.push((format!("ebql_{k}"), a));
    }
    for (k, m) in [(3usize, 1usize), (3, 2), (5, 1), (5, 2)] {
        let mut a = algo("redq");
        a.ensembles = Some(k);
        a.subset_size = Some(m);
        grid.push((format!("redq_{k}_{m}"), a));
    }
    let mut wdq = algo("wdq");
    wdq.c = Some(10.0);
    grid.push(("wdq_c10".to_string(), wdq));
    grid
}

/// Numeric row values in column order (correct_action as 0/1).
fn row_values(row: &EvalRow) -> Vec<f64> {
    let mut values = vec![
        row.eval_return,
        f64::from(row.correct_action),
        row.summed_abs_bias,
    ];
    for i in 0..row.q.len() {
        values.push(row.q[i]);
        if let Some(s2) = &row.s2 {
            values.push(s2[i]);
        }
        values.push(row.bias[i]);
    }
    values
}

/// Cross-seed aggregate: per evaluation step, mean and standard error of every
/// column, in seed-index order regardless of how runs were produced.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub steps: Vec<u64>,
    pub columns: Vec<String>,
    /// `mean[step_index][column_index]`
    pub mean: Vec<Vec<f64>>,
    /// standard error across seeds (0 for a single seed)
    pub se: Vec<Vec<f64>>,
    pub n_seeds: usize,
}

pub fn aggregate(records: &[RunRecord], columns: Vec<String>) -> Result<Aggregate, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Ragged("no records to aggregate".into()));
    }
    let steps: Vec<u64> = records[0].rows.iter().map(|r| r.step).collect();
    for record in records {
        let this: Vec<u64> = record.rows.iter().map(|r| r.step).collect();
        if this != steps {
            return Err(HarnessError::Ragged(format!(
                "seed {} has mismatched evaluation steps",
                record.seed
            )));
        }
    }
    let n = records.len() as f64;
    let mut mean = Vec::with_capacity(steps.len());
    let mut se = Vec::with_capacity(steps.len());
    for row_idx in 0..steps.len() {
        let per_seed: Vec<Vec<f64>> = records
            .iter()
            .map(|r| row_values(&r.rows[row_idx]))
            .collect();
        let width = per_seed[0].len();
        if width != columns.len() {
            return Err(HarnessError::Ragged("column count mismatch".into()));
        }
        let mut row_mean = vec![0.0; width];
        for values in &per_seed {
            for (m, v) in row_mean.iter_mut().zip(values) {
                *m += v;
            }
        }
        for m in &mut row_mean {
            *m /= n;
        }
        let mut row_se = vec![0.0; width];
        if records.len() > 1 {
            for values in &per_seed {
                for ((s, v), m) in row_se.iter_mut().zip(values).zip(&row_mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut row_se {
                *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
            }
        }
        mean.push(row_mean);
        se.push(row_se);
    }
    Ok(Aggregate {
        steps,
        columns,
        mean,
        se,
        n_seeds: records.len(),
    })
}

impl Aggregate {
    /// CSV: `step` then `{col}_mean,{col}_se` per column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for name in &self.columns {
            let _ = write!(out, ",{name}_mean,{name}_se");
        }
        out.push('\n');
        for (i, step) in self.steps.iter().enumerate() {
            let _ = write!(out, "{step}");
            for c in 0..self.columns.len() {
                let _ = write!(
                    out,
                    ",{},{}",
                    fmt_float(self.mean[i][c]),
                    fmt_float(self.se[i][c])
                );
            }
            out.push('\n');
        }
        out
    }

    /// Smoothed copy of the mean series (trailing window, partial windows
    /// averaged over the available points) for plotting; raw data stays
    /// untouched.
    pub fn smoothed_csv(&self, window: usize) -> String {
        let mut out = String::from("step");
        for name in &self.columns {
            let _ = write!(out, ",{name}_mean_smooth");
        }
        out.push('\n');
        for (i, step) in self.steps.iter().enumerate() {
            let _ = write!(out, "{step}");
            let lo = (i + 1).saturating_sub(window);
            for c in 0..self.columns.len() {
                let sum: f64 = (lo..=i).map(|j| self.mean[j][c]).sum();
                let _ = write!(out, ",{}", fmt_float(sum / (i - lo + 1) as f64));
            }
            out.push('\n');
        }
        out
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Mean series of a named column.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.mean.iter().map(|row| row[idx]).collect())
    }
}

/// Trailing rolling mean with partial leading windows.
pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    series
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = (i + 1).saturating_sub(window);
            series[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64
        })
        .collect()
}

/// Parses a per-seed CSV produced by `record_to_csv` back into a record.
/// Returns the column names (after step, seed) and the record.
pub fn parse_record_csv(text: &str) -> Result<(Vec<String>, RunRecord), HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::MalformedCsv("empty file".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 5 || names[0] != "step" || names[1] != "seed" {
        return Err(HarnessError::MalformedCsv("unexpected header".into()));
    }
    let columns: Vec<String> = names[2..].iter().map(|s| s.to_string()).collect();
    let has_s2 = columns.iter().any(|c| c.starts_with("s2_"));
    let n_pairs = columns.iter().filter(|c| c.starts_with("q_")).count();

    let mut seed = 0;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(HarnessError::MalformedCsv(format!(
                "row {} width",
                lineno + 2
            )));
        }
        let parse = |s: &str| -> Result<f64, HarnessError> {
            s.parse::<f64>()
                .map_err(|e| HarnessError::MalformedCsv(format!("{s:?}: {e}")))
        };
        let step = fields[0]
            .parse::<u64>()
            .map_err(|e| HarnessError::MalformedCsv(format!("step: {e}")))?;
        seed = fields[1]
            .parse::<u64>()
            .map_err(|e| HarnessError::MalformedCsv(format!("seed: {e}")))?;
        let eval_return = parse(fields[2])?;
        let correct_action = fields[3]
            .parse::<u8>()
            .map_err(|e| HarnessError::MalformedCsv(format!("correct_action: {e}")))?;
        let summed_abs_bias = parse(fields[4])?;
        let mut q = Vec::with_capacity(n_pairs);
        let mut s2 = has_s2.then(|| Vec::with_capacity(n_pairs));
        let mut bias = Vec::with_capacity(n_pairs);
        let mut cursor = 5;
        for _ in 0..n_pairs {
            q.push(parse(fields[cursor])?);
            cursor += 1;
            if let Some(v) = s2.as_mut() {
                v.push(parse(fields[cursor])?);
                cursor += 1;
            }
            bias.push(parse(fields[cursor])?);
            cursor += 1;
        }
        rows.push(EvalRow {
            step,
            eval_return,
            correct_action,
            summed_abs_bias,
            q,
            s2,
            bias,
        });
    }
    Ok((columns, RunRecord { seed, rows }))
}
