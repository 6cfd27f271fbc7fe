//! Theory verification config and report rendering.

use std::fmt::Write as _;

use anyhow::Result;
use serde::Deserialize;

use addq_core::theory::{
    run_replicates, verify_bias_bound, verify_max_bounds, verify_variance_law,
};

#[derive(Debug, Deserialize)]
pub struct TheoryConfig {
    #[serde(default)]
    pub variance_law: Vec<VarianceLawSection>,
    #[serde(default)]
    pub bias_bound: Vec<BiasBoundSection>,
    #[serde(default)]
    pub max_bounds: Vec<MaxBoundsSection>,
}

#[derive(Debug, Deserialize)]
pub struct VarianceLawSection {
    pub k: usize,
    pub sigma: f64,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
pub struct BiasBoundSection {
    pub gamma: f64,
    pub sigma: f64,
    pub k: usize,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
pub struct MaxBoundsSection {
    pub k: usize,
    pub sigma: f64,
    pub draws: usize,
    pub seed: u64,
}

fn replicates_csv(
    k: usize,
    sigma: f64,
    gamma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<String> {
    let estimates = run_replicates(k, 0.0, sigma, gamma, n, replicates, seed)?;
    let mut csv = String::from("replicate,s2_chosen,q_hat,chosen_arm\n");
    for (i, e) in estimates.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{}",
            addq_core::harness::fmt_float(e.s2_chosen),
            addq_core::harness::fmt_float(e.q_hat),
            e.chosen_arm
        );
    }
    Ok(csv)
}

/// Plain-text report, raw replicate CSVs as (filename, contents), and
/// whether everything passed.
pub type TheoryOutcome = (String, Vec<(String, String)>, bool);

/// Runs every configured check.
pub fn run(config: &TheoryConfig) -> Result<TheoryOutcome> {
    let mut report = String::new();
    let mut csvs = Vec::new();
    let mut all_pass = true;

    for (i, section) in config.variance_law.iter().enumerate() {
        let r = verify_variance_law(
            section.k,
            section.sigma,
            section.n,
            section.replicates,
            section.seed,
        )?;
        let _ = writeln!(report, "== variance-law check {i} ==");
        let _ = writeln!(
            report,
            "config: k={} sigma={} n={} replicates={} seed={}",
            section.k, section.sigma, section.n, section.replicates, section.seed
        );
        let _ = writeln!(
            report,
            "ks_statistic={:.6} p_value={:.6}",
            r.ks_statistic, r.p_value
        );
        let _ = writeln!(
            report,
            "empirical_mean={:.6} expected={:.6} tolerance={:.6}",
            r.empirical_mean, r.expected_mean, r.mean_tolerance
        );
        let _ = writeln!(
            report,
            "empirical_variance={:.6} expected={:.6} tolerance={:.6}",
            r.empirical_variance, r.expected_variance, r.variance_tolerance
        );
        let _ = writeln!(report, "result: {}\n", if r.pass { "PASS" } else { "FAIL" });
        all_pass &= r.pass;
        csvs.push((
            format!("variance_law_{i}.csv"),
            replicates_csv(
                section.k,
                section.sigma,
                1.0,
                section.n,
                section.replicates,
                section.seed,
            )?,
        ));
    }

    for (i, section) in config.bias_bound.iter().enumerate() {
        let r = verify_bias_bound(
            section.gamma,
            section.sigma,
            section.k,
            section.n,
            section.replicates,
            section.seed,
        )?;
        let _ = writeln!(report, "== bias-bound check {i} ==");
        let _ = writeln!(
            report,
            "config: gamma={} sigma={} k={} n={} replicates={} seed={}",
            section.gamma, section.sigma, section.k, section.n, section.replicates, section.seed
        );
        let _ = writeln!(
            report,
            "empirical_mean_bias={:.6} stderr={:.6} lower_bound={:.6}",
            r.empirical_mean_bias, r.stderr, r.lower_bound
        );
        let _ = writeln!(report, "result: {}\n", if r.pass { "PASS" } else { "FAIL" });
        all_pass &= r.pass;
        csvs.push((
            format!("bias_bound_{i}.csv"),
            replicates_csv(
                section.k,
                section.sigma,
                section.gamma,
                section.n,
                section.replicates,
                section.seed,
            )?,
        ));
    }

    for (i, section) in config.max_bounds.iter().enumerate() {
        let r = verify_max_bounds(section.k, section.sigma, section.draws, section.seed)?;
        let _ = writeln!(report, "== gaussian-max bounds check {i} ==");
        let _ = writeln!(
            report,
            "config: k={} sigma={} draws={} seed={}",
            section.k, section.sigma, section.draws, section.seed
        );
        let _ = writeln!(
            report,
            "lower={:.6} empirical_mean={:.6} upper={:.6}",
            r.lower, r.empirical_mean, r.upper
        );
        let _ = writeln!(report, "result: {}\n", if r.pass { "PASS" } else { "FAIL" });
        all_pass &= r.pass;
    }

    let _ = writeln!(
        report,
        "overall: {}",
        if all_pass { "PASS" } else { "FAIL" }
    );
    Ok((report, csvs, all_pass))
}
