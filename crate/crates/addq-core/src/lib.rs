//! Tabular distributional Q-learning laboratory.
//!
//! The crate is organized in layers:
//!
//! * [`dist`] — finite atomic return distributions (categorical on a fixed
//!   grid, quantile with free atoms) and the measure operators every update
//!   rule composes: pushforward, projection, mixture, moments, Cramér metric.
//! * [`env`] — the two tabular environments (two-sided bandit, 4x4 stochastic
//!   grid world) as exact models and seeded samplers.
//! * [`agent`] — scalar and distributional learners: Q-learning, double
//!   Q-learning, clipped, weighted-double, Maxmin/EBQL/REDQ ensembles, and
//!   adaptive distributional double Q-learning (ADDQ) with its beta schedules.
//! * [`oracle`] — exact ground truth: value iteration, projected categorical
//!   dynamic programming, policy evaluation by linear solve, bias reports.
//! * [`theory`] — Monte Carlo verification of the overestimation lower bound
//!   and the chi-squared sample-variance law, plus the statistical machinery
//!   (incomplete gamma, one-sample Kolmogorov-Smirnov test).
//! * [`harness`] — experiment configuration, seeding, learning/evaluation
//!   loops, CSV emission, and cross-seed aggregation.

pub mod agent;
pub mod dist;
pub mod env;
pub mod harness;
pub mod oracle;
pub mod seeding;
pub mod theory;
