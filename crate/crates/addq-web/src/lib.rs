//! Browser bindings for the tabular laboratory. Three interactive operations
//! back the static demo page: grid-world bias curves for the adaptive learner
//! against its fixed-weight endpoints, bandit correct-action curves for
//! Q-learning against the adaptive learner, and snapshots of one
//! return-distribution cell over training.
//!
//! Every function is deterministic in its seed argument and returns JSON for
//! the page's canvas plots. Build with
//! `cargo build -p addq-web --target wasm32-unknown-unknown --release`
//! followed by `wasm-bindgen --target web` (see the repository README).

use serde::Serialize;
use wasm_bindgen::prelude::*;

use addq_core::agent::{
    act, BetaSchedule, DistDoubleAgent, ExplorationPolicy, Learner, Repr, Transition,
};
use addq_core::dist::ReturnDist;
use addq_core::env::{gridworld_model, GridWorldSpec};
use addq_core::harness::{aggregate, Experiment, ExperimentConfig};
use addq_core::seeding::{stream, TAG_LEARN};

#[derive(Serialize)]
struct CurveSet {
    steps: Vec<u64>,
    series: Vec<NamedSeries>,
}

#[derive(Serialize)]
struct NamedSeries {
    name: String,
    values: Vec<f64>,
}

fn gridworld_toml(algorithm: &str, schedule: &str, steps: u32, seeds: u32, master: u32) -> String {
    let seeds: Vec<u64> = (0..seeds as u64).map(|i| master as u64 + i).collect();
    let beta = if algorithm == "addq" {
        format!("beta_schedule = \"{schedule}\"")
    } else {
        String::new()
    };
    format!(
        r#"
        [experiment]
        total_steps = {steps}
        eval_every = 500
        seeds = {seeds:?}

        [environment]
        kind = "gridworld"

        [algorithm]
        name = "{algorithm}"
        {beta}

        [representation]
        kind = "categorical"
        support_min = -3.0
        support_max = 3.0
        atoms = 51
        "#
    )
}

fn mean_series(config_text: &str, column: &str) -> Result<(Vec<u64>, Vec<f64>), String> {
    let config = ExperimentConfig::from_toml(config_text).map_err(|e| e.to_string())?;
    let experiment = Experiment::prepare(config).map_err(|e| e.to_string())?;
    let records = experiment.run_all().map_err(|e| e.to_string())?;
    let agg = aggregate(&records, experiment.column_names()).map_err(|e| e.to_string())?;
    let series = agg
        .series(column)
        .ok_or_else(|| format!("no column {column}"))?;
    Ok((agg.steps, series))
}

/// Summed absolute Q-bias on the grid world for the adaptive learner (with
/// the chosen beta schedule) against its two fixed-weight endpoints.
pub fn gridworld_bias_curves_json(
    total_steps: u32,
    n_seeds: u32,
    schedule: &str,
    master_seed: u32,
) -> Result<String, String> {
    if BetaSchedule::preset(schedule).is_err() {
        return Err(format!("unknown beta schedule {schedule:?}"));
    }
    let mut steps = Vec::new();
    let mut series = Vec::new();
    for (name, label) in [
        ("addq", format!("adaptive ({schedule})")),
        ("dist_ql", "beta = 1 (Q)".into()),
        ("dist_dql", "beta = 0 (double Q)".into()),
    ] {
        let text = gridworld_toml(name, schedule, total_steps, n_seeds, master_seed);
        let (s, values) = mean_series(&text, "summed_abs_bias")?;
        steps = s;
        series.push(NamedSeries {
            name: label,
            values,
        });
    }
    serde_json::to_string(&CurveSet { steps, series }).map_err(|e| e.to_string())
}

/// Correct-action rate at the bandit start state for scalar Q-learning
/// against the adaptive learner, with the left side's arm count and spread
/// free.
pub fn bandit_curves_json(
    k1: u32,
    sigma1: f64,
    total_steps: u32,
    n_seeds: u32,
    master_seed: u32,
) -> Result<String, String> {
    if k1 == 0 {
        return Err("k1 must be at least 1".into());
    }
    let seeds: Vec<u64> = (0..n_seeds as u64)
        .map(|i| master_seed as u64 + i)
        .collect();
    let mut steps = Vec::new();
    let mut series = Vec::new();
    for (algorithm, extra, label) in [
        ("ql", "".to_string(), "Q-learning"),
        (
            "addq",
            "beta_schedule = \"n3\"\n\n[representation]\nkind = \"categorical\"\nsupport_min = -3.0\nsupport_max = 3.0\natoms = 51".to_string(),
            "adaptive (n3)",
        ),
    ] {
        let text = format!(
            r#"
            [experiment]
            total_steps = {total_steps}
            eval_every = 500
            seeds = {seeds:?}

            [environment]
            kind = "bandit"
            k1 = {k1}
            sigma1 = {sigma1}

            [algorithm]
            name = "{algorithm}"
            {extra}
            "#
        );
        let (s, values) = mean_series(&text, "correct_action")?;
        steps = s;
        series.push(NamedSeries { name: label.to_string(), values });
    }
    serde_json::to_string(&CurveSet { steps, series }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DistributionEvolution {
    locations: Vec<f64>,
    snapshots: Vec<Snapshot>,
}

#[derive(Serialize)]
struct Snapshot {
    step: u64,
    weights: Vec<f64>,
    mean: f64,
    variance: f64,
    beta: f64,
}

/// Snapshots of one return-distribution cell (the A table of the adaptive
/// learner) over grid-world training, plus the beta its next update at that
/// cell's state would consume.
pub fn gridworld_distribution_json(
    state: u32,
    action: u32,
    total_steps: u32,
    n_snapshots: u32,
    schedule: &str,
    seed: u32,
) -> Result<String, String> {
    let model = gridworld_model(&GridWorldSpec::default());
    let state = state as usize;
    let action = action as usize;
    if state >= model.n_states() || model.is_terminal(state) {
        return Err(format!("state {state} is terminal or out of range"));
    }
    if action >= model.n_actions(state) {
        return Err(format!("action {action} out of range"));
    }
    let support = addq_core::dist::Support::new(-3.0, 3.0, 51).map_err(|e| e.to_string())?;
    let shape: Vec<usize> = (0..model.n_states()).map(|s| model.n_actions(s)).collect();
    let schedule = BetaSchedule::preset(schedule).map_err(|e| e.to_string())?;
    let mut agent =
        DistDoubleAgent::addq(&shape, Repr::Categorical(support), model.gamma, schedule);
    let policy = ExplorationPolicy::eps_greedy_default();
    let mut rng = stream(seed as u64, TAG_LEARN, 0);

    let n_snapshots = n_snapshots.clamp(2, 200) as u64;
    let total = total_steps.max(1) as u64;
    let interval = (total / n_snapshots).max(1);

    let snapshot = |agent: &DistDoubleAgent, step: u64| -> Snapshot {
        let dist = &agent.table_a.dists[state][action];
        let weights = match dist {
            ReturnDist::Categorical(d) => d.weights().to_vec(),
            ReturnDist::Quantile(_) => unreachable!("demo uses the categorical parametrization"),
        };
        let a_star = addq_core::agent::select_greedy(&agent.table_a.means(state));
        Snapshot {
            step,
            weights,
            mean: dist.mean(),
            variance: dist.sample_variance(),
            beta: agent.beta_at(state, a_star),
        }
    };

    let mut snapshots = vec![snapshot(&agent, 0)];
    let mut s = model.start;
    let mut episode_steps = 0usize;
    for t in 0..total {
        let a = act(&policy, &agent.values(s), t, &mut rng);
        let (r, s_next, terminal) = model
            .sample_transition(s, a, &mut rng)
            .map_err(|e| e.to_string())?;
        agent.update(
            &Transition {
                s,
                a,
                r,
                s_next,
                terminal,
            },
            &mut rng,
        );
        episode_steps += 1;
        s = if terminal || episode_steps >= 100 {
            episode_steps = 0;
            model.start
        } else {
            s_next
        };
        if (t + 1) % interval == 0 || t + 1 == total {
            snapshots.push(snapshot(&agent, t + 1));
        }
    }
    let locations = support.locations().collect();
    serde_json::to_string(&DistributionEvolution {
        locations,
        snapshots,
    })
    .map_err(|e| e.to_string())
}

// JS-facing wrappers.

#[wasm_bindgen]
pub fn gridworld_bias_curves(
    total_steps: u32,
    n_seeds: u32,
    schedule: &str,
    master_seed: u32,
) -> Result<String, JsError> {
    gridworld_bias_curves_json(total_steps, n_seeds, schedule, master_seed)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bandit_curves(
    k1: u32,
    sigma1: f64,
    total_steps: u32,
    n_seeds: u32,
    master_seed: u32,
) -> Result<String, JsError> {
    bandit_curves_json(k1, sigma1, total_steps, n_seeds, master_seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gridworld_distribution(
    state: u32,
    action: u32,
    total_steps: u32,
    n_snapshots: u32,
    schedule: &str,
    seed: u32,
) -> Result<String, JsError> {
    gridworld_distribution_json(state, action, total_steps, n_snapshots, schedule, seed)
        .map_err(|e| JsError::new(&e))
}

/// Names accepted by the schedule dropdowns.
#[wasm_bindgen]
pub fn beta_schedule_names() -> String {
    BetaSchedule::preset_names().join(",")
}
