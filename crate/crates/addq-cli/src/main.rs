//! `addq` — the experiment harness CLI.
//!
//! Subcommands: `run` (seeded experiments to per-seed CSVs plus an
//! aggregate), `verify-theory` (statistical checks with a plain-text report
//! and raw replicate CSVs), `oracle` (golden Q*/return-distribution tables),
//! `dump-model` (transition table dump), `ablate` (beta-schedule sweep),
//! `compare` (ensemble/weighted baseline grid), and `report` (re-aggregate a
//! run directory).
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a
//! `verify-theory` check fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use addq_core::agent::BetaSchedule;
use addq_core::harness::{
    aggregate, comparison_grid, Aggregate, EnvOnlyConfig, Experiment, ExperimentConfig, RunRecord,
};
use addq_core::oracle::{categorical_fixed_point, greedy_policy, q_table_tsv, value_iteration};

mod theory_config;
use theory_config::TheoryConfig;

#[derive(Parser)]
#[command(
    name = "addq",
    about = "Tabular distributional Q-learning laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Max seeds run in parallel
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Added to every seed in the config
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and emit per-seed CSVs plus an aggregate
    Run(RunArgs),
    /// Run the statistical verification suites from a theory config
    VerifyTheory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit golden oracle tables (Q* and, for finite-reward environments,
    /// the projected categorical fixed point under the greedy policy)
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the environment's transition table
    DumpModel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep all named beta schedules over the configured experiment
    Ablate(RunArgs),
    /// Run the ensemble/weighted comparison grid over the configured
    /// environment
    Compare(RunArgs),
    /// Re-aggregate the per-seed CSVs of a run directory
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        /// Rolling window for the smoothed plot series
        #[arg(long, default_value_t = 4)]
        window: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are successes, everything else is a
            // usage/config error
            return if err.use_stderr() {
                let _ = err.print();
                ExitCode::from(1)
            } else {
                let _ = err.print();
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::VerifyTheory { config, output } => cmd_verify_theory(&config, output.as_deref()),
        Command::Oracle { config, output } => cmd_oracle(&config, output.as_deref()),
        Command::DumpModel { config, output } => cmd_dump_model(&config, output.as_deref()),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Report { run_dir, window } => cmd_report(&run_dir, window),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_toml(&text).context("parsing experiment config")
}

fn load_env_only(path: &Path) -> Result<EnvOnlyConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    EnvOnlyConfig::from_toml(&text).context("parsing environment config")
}

fn output_dir(cli: Option<&Path>, config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = match (cli, &config.experiment.output_dir) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => bail!("no output directory: pass --output or set experiment.output_dir"),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Runs all seeds of a prepared experiment, at most `jobs` in parallel,
/// collecting results in seed-index order.
fn run_seeds(experiment: &Experiment, jobs: usize) -> Result<Vec<RunRecord>> {
    let seeds = experiment.config.experiment.seeds.clone();
    let jobs = jobs.max(1);
    let mut records: Vec<Option<RunRecord>> = (0..seeds.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: std::sync::Mutex<Vec<(usize, RunRecord)>> = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..jobs.min(seeds.len()) {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if idx >= seeds.len() {
                        return Ok(());
                    }
                    let record = experiment.run_seed(seeds[idx])?;
                    results.lock().expect("worker panicked").push((idx, record));
                }
            }));
        }
        for handle in handles {
            handle.join().expect("worker panicked")?;
        }
        Ok(())
    })?;
    for (idx, record) in results.into_inner().expect("poisoned") {
        records[idx] = Some(record);
    }
    Ok(records
        .into_iter()
        .map(|r| r.expect("all seeds ran"))
        .collect())
}

/// Runs one experiment into `dir`: seed_<seed>.csv per seed + aggregate.csv.
/// The aggregate is computed from the emitted CSV text, so it is a pure
/// function of the per-seed files and `report` reproduces it byte for byte.
fn run_into_dir(config: ExperimentConfig, dir: &Path, jobs: usize) -> Result<Aggregate> {
    let experiment = Experiment::prepare(config)?;
    let records = run_seeds(&experiment, jobs)?;
    let mut rounded = Vec::with_capacity(records.len());
    for record in &records {
        let text = experiment.record_to_csv(record);
        let path = dir.join(format!("seed_{}.csv", record.seed));
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        rounded.push(addq_core::harness::parse_record_csv(&text)?.1);
    }
    let agg = aggregate(&rounded, experiment.column_names())?;
    fs::write(dir.join("aggregate.csv"), agg.to_csv())?;
    Ok(agg)
}

fn apply_seed_offset(config: &mut ExperimentConfig, offset: u64) {
    if offset != 0 {
        for seed in &mut config.experiment.seeds {
            *seed += offset;
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut config = load_experiment(&args.config)?;
    apply_seed_offset(&mut config, args.seed_offset);
    let dir = output_dir(args.output.as_deref(), &config)?;
    let agg = run_into_dir(config, &dir, args.jobs)?;
    println!(
        "wrote {} seeds x {} evaluation rows to {}",
        agg.n_seeds,
        agg.steps.len(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_theory(config_path: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: TheoryConfig = toml::from_str(&text).context("parsing theory config")?;
    let (report, raw_csvs, all_pass) = theory_config::run(&config)?;
    print!("{report}");
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("theory_report.txt"), &report)?;
        for (name, csv) in raw_csvs {
            fs::write(dir.join(name), csv)?;
        }
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_oracle(config_path: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let config = load_env_only(config_path)?;
    let (model, _) = config.environment.build()?;
    let vi = value_iteration(&model, 1e-10)?;
    let q_star_tsv = q_table_tsv(&vi.q);

    let mut eta_tsv = None;
    match config.representation.repr()? {
        Some(addq_core::agent::Repr::Categorical(support)) => {
            let policy = greedy_policy(&vi.q);
            match categorical_fixed_point(&model, &policy, support, 1e-10) {
                Ok(fp) => {
                    let mut out = String::from("state\taction\tatom\tlocation\tweight\n");
                    for s in model.live_states() {
                        for a in 0..model.n_actions(s) {
                            for (i, w) in fp.table[s][a].weights().iter().enumerate() {
                                let _ = writeln!(
                                    out,
                                    "{s}\t{a}\t{i}\t{:.16e}\t{:.16e}",
                                    support.location(i),
                                    w
                                );
                            }
                        }
                    }
                    eta_tsv = Some(out);
                }
                Err(err) => eprintln!("categorical fixed point skipped: {err}"),
            }
        }
        _ => eprintln!("no categorical representation configured; emitting Q* only"),
    }

    match output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("q_star.tsv"), &q_star_tsv)?;
            println!("wrote {}", dir.join("q_star.tsv").display());
            if let Some(eta) = &eta_tsv {
                fs::write(dir.join("eta_c.tsv"), eta)?;
                println!("wrote {}", dir.join("eta_c.tsv").display());
            }
        }
        None => {
            print!("{q_star_tsv}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump_model(config_path: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let config = load_env_only(config_path)?;
    let (model, _) = config.environment.build()?;
    let dump = model.dump();
    match output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("model.txt"), &dump)?;
            println!("wrote {}", dir.join("model.txt").display());
        }
        None => print!("{dump}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(args: RunArgs) -> Result<ExitCode> {
    let mut base = load_experiment(&args.config)?;
    apply_seed_offset(&mut base, args.seed_offset);
    if base.algorithm.name != "addq" {
        bail!("ablate sweeps beta schedules and needs an addq base config");
    }
    let dir = output_dir(args.output.as_deref(), &base)?;
    let mut summary =
        String::from("schedule,final_summed_abs_bias_mean,final_summed_abs_bias_se\n");
    for name in BetaSchedule::preset_names() {
        let mut config = base.clone();
        config.algorithm.beta_schedule = Some(name.to_string());
        config.algorithm.constant_beta = None;
        let sub = dir.join(name);
        fs::create_dir_all(&sub)?;
        let agg = run_into_dir(config, &sub, args.jobs)?;
        let idx = agg.column_index("summed_abs_bias").expect("column exists");
        let last = agg.steps.len() - 1;
        let _ = writeln!(
            summary,
            "{name},{},{}",
            addq_core::harness::fmt_float(agg.mean[last][idx]),
            addq_core::harness::fmt_float(agg.se[last][idx])
        );
        println!("{name}: final summed |bias| {:.4}", agg.mean[last][idx]);
    }
    fs::write(dir.join("ablation_summary.csv"), summary)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: RunArgs) -> Result<ExitCode> {
    let mut base = load_experiment(&args.config)?;
    apply_seed_offset(&mut base, args.seed_offset);
    let dir = output_dir(args.output.as_deref(), &base)?;
    let mut summary =
        String::from("algorithm,final_summed_abs_bias_mean,final_summed_abs_bias_se\n");
    for (label, algorithm) in comparison_grid() {
        let mut config = base.clone();
        config.algorithm = algorithm;
        config.representation = addq_core::harness::RepresentationConfig::Scalar;
        let sub = dir.join(&label);
        fs::create_dir_all(&sub)?;
        let agg = run_into_dir(config, &sub, args.jobs)?;
        let idx = agg.column_index("summed_abs_bias").expect("column exists");
        let last = agg.steps.len() - 1;
        let _ = writeln!(
            summary,
            "{label},{},{}",
            addq_core::harness::fmt_float(agg.mean[last][idx]),
            addq_core::harness::fmt_float(agg.se[last][idx])
        );
        println!("{label}: final summed |bias| {:.4}", agg.mean[last][idx]);
    }
    fs::write(dir.join("comparison_summary.csv"), summary)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(run_dir: &Path, window: usize) -> Result<ExitCode> {
    let mut records = Vec::new();
    let mut columns = None;
    let mut entries: Vec<PathBuf> = fs::read_dir(run_dir)
        .with_context(|| format!("reading {}", run_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("seed_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no seed_*.csv files in {}", run_dir.display());
    }
    for path in entries {
        let text = fs::read_to_string(&path)?;
        let (cols, record) = addq_core::harness::parse_record_csv(&text)?;
        if let Some(existing) = &columns {
            if existing != &cols {
                bail!("{} has a different column set", path.display());
            }
        } else {
            columns = Some(cols);
        }
        records.push(record);
    }
    records.sort_by_key(|r| r.seed);
    let agg = aggregate(&records, columns.expect("at least one file"))?;
    fs::write(run_dir.join("aggregate.csv"), agg.to_csv())?;
    fs::write(run_dir.join("smoothed.csv"), agg.smoothed_csv(window))?;
    println!(
        "aggregated {} seeds x {} rows into {}",
        agg.n_seeds,
        agg.steps.len(),
        run_dir.join("aggregate.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}
