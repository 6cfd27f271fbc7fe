//! TOML experiment configuration: schema, defaults, validation, and the
//! mapping onto models and learners.

use serde::Deserialize;
use thiserror::Error;

use crate::agent::{
    BetaPolicy, BetaSchedule, DistAgent, DistDoubleAgent, DoubleAgent, DoubleKind, EnsembleAgent,
    EnsembleKind, ExplorationPolicy, Learner, QlAgent, Repr,
};
use crate::dist::Support;
use crate::env::{bandit_model, gridworld_model, BanditSpec, GridWorldSpec, TabularModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("environment error: {0}")]
    Env(#[from] crate::env::EnvError),
    #[error("agent error: {0}")]
    Agent(#[from] crate::agent::AgentError),
    #[error("distribution error: {0}")]
    Dist(#[from] crate::dist::DistError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub total_steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Greedy evaluation rollout length; defaults to 3 on the bandit and 6 on
    /// the grid world.
    pub eval_horizon: Option<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<String>,
}

fn default_name() -> String {
    "experiment".to_string()
}

fn default_eval_every() -> u64 {
    500
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Bandit {
        k1: usize,
        sigma1: f64,
        #[serde(default = "default_k2")]
        k2: usize,
        #[serde(default = "default_mu1")]
        mu1: f64,
        #[serde(default = "default_mu2")]
        mu2: f64,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Gridworld {
        #[serde(default = "default_step_cap")]
        step_cap: usize,
    },
}

fn default_k2() -> usize {
    5
}
fn default_mu1() -> f64 {
    -0.1
}
fn default_mu2() -> f64 {
    0.1
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.9
}
fn default_step_cap() -> usize {
    100
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<(TabularModel, usize), ConfigError> {
        match *self {
            EnvironmentConfig::Bandit {
                k1,
                sigma1,
                k2,
                mu1,
                mu2,
                sigma2,
                gamma,
            } => {
                let spec = BanditSpec {
                    k1,
                    k2,
                    mu1,
                    mu2,
                    sigma1,
                    sigma2,
                    gamma,
                };
                Ok((bandit_model(&spec)?, 100))
            }
            EnvironmentConfig::Gridworld { step_cap } => {
                Ok((gridworld_model(&GridWorldSpec { step_cap }), step_cap))
            }
        }
    }

    pub fn default_eval_horizon(&self) -> usize {
        match self {
            EnvironmentConfig::Bandit { .. } => 3,
            EnvironmentConfig::Gridworld { .. } => 6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct AlgorithmConfig {
    pub name: String,
    pub beta_schedule: Option<String>,
    pub constant_beta: Option<f64>,
    pub ensembles: Option<usize>,
    pub subset_size: Option<usize>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepresentationConfig {
    #[default]
    Scalar,
    Categorical {
        support_min: f64,
        support_max: f64,
        atoms: usize,
    },
    Quantile {
        atoms: usize,
    },
}

impl RepresentationConfig {
    pub fn repr(&self) -> Result<Option<Repr>, ConfigError> {
        Ok(match *self {
            RepresentationConfig::Scalar => None,
            RepresentationConfig::Categorical {
                support_min,
                support_max,
                atoms,
            } => Some(Repr::Categorical(Support::new(
                support_min,
                support_max,
                atoms,
            )?)),
            RepresentationConfig::Quantile { atoms } => {
                if atoms == 0 {
                    return Err(invalid("quantile representation needs at least one atom"));
                }
                Some(Repr::Quantile(atoms))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationConfig {
    EpsGreedyLinear {
        #[serde(default = "default_eps_start")]
        eps_start: f64,
        #[serde(default = "default_eps_end")]
        eps_end: f64,
        #[serde(default = "default_decay_steps")]
        decay_steps: u64,
    },
    Uniform,
}

fn default_eps_start() -> f64 {
    1.0
}
fn default_eps_end() -> f64 {
    0.1
}
fn default_decay_steps() -> u64 {
    10_000
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig::EpsGreedyLinear {
            eps_start: default_eps_start(),
            eps_end: default_eps_end(),
            decay_steps: default_decay_steps(),
        }
    }
}

impl ExplorationConfig {
    pub fn policy(&self) -> Result<ExplorationPolicy, ConfigError> {
        match *self {
            ExplorationConfig::EpsGreedyLinear {
                eps_start,
                eps_end,
                decay_steps,
            } => {
                if !(0.0..=1.0).contains(&eps_end)
                    || !(0.0..=1.0).contains(&eps_start)
                    || eps_end > eps_start
                {
                    return Err(invalid("need 0 <= eps_end <= eps_start <= 1"));
                }
                Ok(ExplorationPolicy::EpsGreedyLinear {
                    eps_start,
                    eps_end,
                    decay_steps,
                })
            }
            ExplorationConfig::Uniform => Ok(ExplorationPolicy::Uniform),
        }
    }
}

/// Full experiment document.
#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub environment: EnvironmentConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub representation: RepresentationConfig,
    #[serde(default)]
    pub exploration: ExplorationConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

/// Environment-only document, accepted by the oracle and model-dump commands.
/// A full experiment config parses here as well.
#[derive(Debug, Clone, Deserialize)]
pub struct EnvOnlyConfig {
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub representation: RepresentationConfig,
}

impl EnvOnlyConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

/// A validated algorithm choice, ready to instantiate per seed.
#[derive(Debug, Clone)]
pub enum AlgorithmSpec {
    Ql,
    Dql,
    Clipped,
    Wdq {
        c: f64,
    },
    Maxmin {
        ensembles: usize,
    },
    Ebql {
        ensembles: usize,
    },
    Redq {
        ensembles: usize,
        subset_size: usize,
    },
    DistQl {
        repr: Repr,
    },
    DistDql {
        repr: Repr,
    },
    Addq {
        repr: Repr,
        beta: BetaPolicy,
    },
}

impl AlgorithmSpec {
    pub fn resolve(
        algorithm: &AlgorithmConfig,
        representation: &RepresentationConfig,
    ) -> Result<Self, ConfigError> {
        let repr = representation.repr()?;
        let scalar_only = |name: &str| match repr {
            None => Ok(()),
            Some(_) => Err(invalid(format!(
                "{name} is a scalar learner; use representation kind = \"scalar\""
            ))),
        };
        let distributional = |name: &str| {
            repr.ok_or_else(|| {
                invalid(format!(
                    "{name} needs a categorical or quantile representation"
                ))
            })
        };
        let ensembles = || {
            algorithm
                .ensembles
                .ok_or_else(|| invalid("ensemble learners need an `ensembles` count"))
        };
        Ok(match algorithm.name.as_str() {
            "ql" => {
                scalar_only("ql")?;
                AlgorithmSpec::Ql
            }
            "dql" => {
                scalar_only("dql")?;
                AlgorithmSpec::Dql
            }
            "clipped" => {
                scalar_only("clipped")?;
                AlgorithmSpec::Clipped
            }
            "wdq" => {
                scalar_only("wdq")?;
                AlgorithmSpec::Wdq {
                    c: algorithm.c.unwrap_or(10.0),
                }
            }
            "maxmin" => {
                scalar_only("maxmin")?;
                AlgorithmSpec::Maxmin {
                    ensembles: ensembles()?,
                }
            }
            "ebql" => {
                scalar_only("ebql")?;
                AlgorithmSpec::Ebql {
                    ensembles: ensembles()?,
                }
            }
            "redq" => {
                scalar_only("redq")?;
                AlgorithmSpec::Redq {
                    ensembles: ensembles()?,
                    subset_size: algorithm.subset_size.unwrap_or(1),
                }
            }
            "dist_ql" => AlgorithmSpec::DistQl {
                repr: distributional("dist_ql")?,
            },
            "dist_dql" => AlgorithmSpec::DistDql {
                repr: distributional("dist_dql")?,
            },
            "addq" => {
                let repr = distributional("addq")?;
                let beta = match (algorithm.constant_beta, algorithm.beta_schedule.as_deref()) {
                    (Some(beta), None) => {
                        if !(0.0..=1.0).contains(&beta) {
                            return Err(invalid("constant_beta must lie in [0, 1]"));
                        }
                        BetaPolicy::Constant(beta)
                    }
                    (None, schedule) => {
                        BetaPolicy::Adaptive(BetaSchedule::preset(schedule.unwrap_or("n3"))?)
                    }
                    (Some(_), Some(_)) => {
                        return Err(invalid(
                            "give either beta_schedule or constant_beta, not both",
                        ))
                    }
                };
                AlgorithmSpec::Addq { repr, beta }
            }
            other => return Err(invalid(format!("unknown algorithm {other:?}"))),
        })
    }

    pub fn build(&self, shape: &[usize], gamma: f64) -> Result<Box<dyn Learner>, ConfigError> {
        Ok(match self {
            AlgorithmSpec::Ql => Box::new(QlAgent::new(shape, gamma)),
            AlgorithmSpec::Dql => Box::new(DoubleAgent::new(shape, gamma, DoubleKind::Double)),
            AlgorithmSpec::Clipped => Box::new(DoubleAgent::new(shape, gamma, DoubleKind::Clipped)),
            AlgorithmSpec::Wdq { c } => Box::new(DoubleAgent::new(
                shape,
                gamma,
                DoubleKind::Weighted { c: *c },
            )),
            AlgorithmSpec::Maxmin { ensembles } => Box::new(EnsembleAgent::new(
                shape,
                gamma,
                *ensembles,
                EnsembleKind::Maxmin,
            )?),
            AlgorithmSpec::Ebql { ensembles } => Box::new(EnsembleAgent::new(
                shape,
                gamma,
                *ensembles,
                EnsembleKind::Ebql,
            )?),
            AlgorithmSpec::Redq {
                ensembles,
                subset_size,
            } => Box::new(EnsembleAgent::new(
                shape,
                gamma,
                *ensembles,
                EnsembleKind::Redq {
                    subset_size: *subset_size,
                },
            )?),
            AlgorithmSpec::DistQl { repr } => Box::new(DistAgent::new(shape, *repr, gamma)),
            AlgorithmSpec::DistDql { repr } => {
                Box::new(DistDoubleAgent::dist_dql(shape, *repr, gamma))
            }
            AlgorithmSpec::Addq { repr, beta } => {
                Box::new(DistDoubleAgent::new(shape, *repr, gamma, beta.clone()))
            }
        })
    }

    /// Whether per-pair sample-variance columns exist for this learner.
    pub fn distributional(&self) -> bool {
        matches!(
            self,
            AlgorithmSpec::DistQl { .. }
                | AlgorithmSpec::DistDql { .. }
                | AlgorithmSpec::Addq { .. }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID_ADDQ: &str = r#"
        [experiment]
        total_steps = 1000
        eval_every = 500
        seeds = [0, 1]

        [environment]
        kind = "gridworld"

        [algorithm]
        name = "addq"
        beta_schedule = "n3"

        [representation]
        kind = "categorical"
        support_min = -3.0
        support_max = 3.0
        atoms = 51
    "#;

    #[test]
    fn parses_and_resolves() {
        let config = ExperimentConfig::from_toml(GRID_ADDQ).unwrap();
        assert_eq!(config.experiment.eval_every, 500);
        assert_eq!(config.environment.default_eval_horizon(), 6);
        let spec = AlgorithmSpec::resolve(&config.algorithm, &config.representation).unwrap();
        assert!(spec.distributional());
    }

    #[test]
    fn addq_requires_distributional_representation() {
        let mut config = ExperimentConfig::from_toml(GRID_ADDQ).unwrap();
        config.representation = RepresentationConfig::Scalar;
        assert!(AlgorithmSpec::resolve(&config.algorithm, &config.representation).is_err());
    }

    #[test]
    fn scalar_algorithms_reject_distributional_representation() {
        let mut config = ExperimentConfig::from_toml(GRID_ADDQ).unwrap();
        config.algorithm.name = "ql".into();
        config.algorithm.beta_schedule = None;
        assert!(AlgorithmSpec::resolve(&config.algorithm, &config.representation).is_err());
    }

    #[test]
    fn bandit_defaults_fill_in() {
        let text = r#"
            [experiment]
            total_steps = 100
            seeds = [0]

            [environment]
            kind = "bandit"
            k1 = 10
            sigma1 = 8.0

            [algorithm]
            name = "ql"
        "#;
        let config = ExperimentConfig::from_toml(text).unwrap();
        let (model, _) = config.environment.build().unwrap();
        assert_eq!(model.n_actions(1), 10);
        assert_eq!(model.n_actions(2), 5);
        assert_eq!(model.gamma, 0.9);
    }

    #[test]
    fn env_only_config_accepts_full_document() {
        assert!(EnvOnlyConfig::from_toml(GRID_ADDQ).is_ok());
    }
}
