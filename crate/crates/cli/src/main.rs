//! `alrank`: train, sweep, compare and evaluate constrained rankers.
//!
//! Exit status is 0 on success, 1 when training or evaluation fails and 2
//! for configuration or usage problems.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alrank::pipeline::{
    linear_weight_search, report_gains, run_baseline, run_sweeps, train_full, write_baseline, write_full,
    write_linear_search, Baseline, GainReport, PipelineConfig, RunDir, Splits,
};
use alrank::{read_letor_file, split_train_valid, BoosterModel, Execution, ObjectiveSet};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::config::{parse_bound, usage, Mode, Overrides, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "alrank", version, about = "Multi-objective LambdaMART with Augmented Lagrangian constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline stage (baseline, sweep, full, lw or evaluate).
    Train {
        /// Stage to run (overrides `mode` in the config).
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep upper bounds for each sub-objective (same as `train --mode sweep`).
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Random search over linear weights (same as `train --mode lw`).
    CompareLw {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the %-gain table of a model against a baseline on a LETOR file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        /// Split name written in the CSV output.
        #[arg(long, default_value = "eval")]
        split: String,
        /// Also write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Proximal step of the dual update.
    #[arg(long)]
    mu: Option<f64>,
    /// Upper bound for one sub-objective, as name=value. Repeatable.
    #[arg(long = "ub", value_parser = parse_bound)]
    bounds: Vec<(String, f64)>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Minimum primary %-gain on validation.
    #[arg(long, allow_hyphen_values = true)]
    goal: Option<f64>,
    /// Percentage points added to the goal when choosing a sweep bound.
    #[arg(long)]
    margin: Option<f64>,
    /// Number of boosting rounds.
    #[arg(long)]
    trees: Option<usize>,
    /// Shrinkage applied to every tree.
    #[arg(long)]
    lr: Option<f64>,
    /// Maximum leaves per tree.
    #[arg(long)]
    leaves: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long)]
    jobs: Option<usize>,
    /// Run directory (overrides data.out).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self, mode: Option<Mode>) -> Overrides {
        Overrides {
            mode,
            mu: self.mu,
            bounds: self.bounds.clone(),
            grid: self.grid.clone(),
            goal: self.goal,
            margin: self.margin,
            trees: self.trees,
            learning_rate: self.lr,
            leaves: self.leaves,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<alrank::Error>() {
            use alrank::Error::*;
            return match err {
                Config(_) | Parse(_) | File { .. } | UnknownObjective(_) | FeatureOutOfRange { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train { mode, run } => run_mode(&run, mode),
        Command::Sweep { run } => run_mode(&run, Some(Mode::Sweep)),
        Command::CompareLw { run } => run_mode(&run, Some(Mode::Lw)),
        Command::Evaluate {
            model,
            data,
            baseline,
            split,
            out,
            jobs,
        } => evaluate(&model, &data, &baseline, &split, out.as_deref(), execution(jobs)?),
    }
}

/// Chooses the execution mode and sizes the global thread pool.
fn execution(jobs: Option<usize>) -> anyhow::Result<Execution> {
    match jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
            #[cfg(not(feature = "parallel"))]
            warn!("built without the parallel feature; ignoring --jobs {n}");
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn run_mode(args: &RunArgs, mode: Option<Mode>) -> anyhow::Result<()> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply(args.overrides(mode));
    let mode = config
        .mode
        .ok_or_else(|| usage("no mode given: pass --mode or set `mode` in the config"))?;
    config.train.execution = execution(args.jobs)?;
    config.train.validate().map_err(|e| usage(e.to_string()))?;
    let (primary, subs) = config.objective_specs()?;
    let bounds = match mode {
        Mode::Full | Mode::Lw => Some(config.bounds()?),
        _ => None,
    };
    let out = config.out_dir()?.to_path_buf();

    let (splits, objectives) = load_splits(&config, primary, subs)?;
    let run = RunDir::create(&out)?;
    let persisted = out.join(format!("{}.toml", mode.name()));
    std::fs::write(&persisted, config.to_toml()?).with_context(|| persisted.display().to_string())?;

    let pipeline = config.pipeline();
    match mode {
        Mode::Baseline => {
            let baseline = run_baseline(&splits, &objectives, &pipeline.train)?;
            write_baseline(&run, &baseline, &pipeline)?;
            for (name, z) in &baseline.scales.entries {
                println!("cost scale {name}: {z}");
            }
        }
        Mode::Sweep => {
            let baseline = load_or_train_baseline(&run, &splits, &objectives, &pipeline)?;
            let results = run_sweeps(&splits, &objectives, &baseline, &pipeline, &run)?;
            let mut flags = Vec::new();
            for r in &results {
                println!("{}:", r.objective);
                for p in &r.points {
                    println!(
                        "  b={:<5} primary {:+.3}%  sub {:+.3}%  train cost {:.4}",
                        p.bound, p.primary_gain, p.sub_gain, p.train_cost
                    );
                }
                if !r.attainable {
                    println!("  no bound meets the primary goal; falling back to {}", r.chosen);
                }
                flags.push(format!("--ub {}={}", r.objective, r.chosen));
            }
            println!("chosen: {}", flags.join(" "));
        }
        Mode::Full => {
            let baseline = load_or_train_baseline(&run, &splits, &objectives, &pipeline)?;
            let full = train_full(&splits, &objectives, &bounds.unwrap_or_default(), &baseline, &pipeline)?;
            write_full(&run, &full, &baseline, &pipeline)?;
            for (b, s) in full.bounds.iter().zip(full.slack()) {
                println!("{}: bound {} slack {:+.4}", b.objective, b.bound, s);
            }
            let report = full.test_report.as_ref().unwrap_or(&full.valid_report);
            println!("{}", GainReport::table(&[("AL-LM", report)]));
        }
        Mode::Lw => {
            let bounds = bounds.unwrap_or_default();
            let baseline = load_or_train_baseline(&run, &splits, &objectives, &pipeline)?;
            let (search, runs) = linear_weight_search(
                &splits,
                &objectives,
                &bounds,
                &baseline,
                &pipeline,
                config.lw.samples,
                config.lw.seed,
            )?;
            write_linear_search(&run, &search, &runs, &bounds, &baseline, &pipeline)?;
            println!(
                "linear weighting: {}/{} trials satisfy every bound",
                search.satisfied_count(),
                search.trials.len()
            );
        }
        Mode::Evaluate => {
            let full = BoosterModel::load(run.path("full/model"))?;
            let baseline = BoosterModel::load(run.path("baseline/model"))?;
            let (data, split) = match &splits.test {
                Some(t) => (t, "test"),
                None => (&splits.valid, "valid"),
            };
            let report = report_gains(&full, &baseline, data, split, pipeline.train.execution)?;
            print!("{}", report.to_csv());
            println!("\n{}", GainReport::table(&[("AL-LM", &report)]));
        }
    }
    Ok(())
}

fn load_splits(
    config: &RunConfig,
    primary: alrank::ObjectiveSpec,
    subs: Vec<alrank::ObjectiveSpec>,
) -> anyhow::Result<(Splits, ObjectiveSet)> {
    let data = &config.data;
    let train = read_letor_file(&data.train)?;
    let (train, valid) = match &data.valid {
        Some(path) => (train, read_letor_file(path)?),
        None => split_train_valid(&train, data.train_fraction, data.split_seed)?,
    };
    let test = data.test.as_ref().map(read_letor_file).transpose()?;
    Ok(Splits::prepare(train, valid, test, primary, subs)?)
}

/// Reuses `baseline/model` when it was trained with the same objectives and
/// training settings; otherwise trains and persists a fresh baseline.
fn load_or_train_baseline(
    run: &RunDir,
    splits: &Splits,
    objectives: &ObjectiveSet,
    config: &PipelineConfig,
) -> anyhow::Result<Baseline> {
    let path = run.path("baseline/model");
    if path.is_file() {
        let model = BoosterModel::load(&path)?;
        let same_settings = model.meta.train_config
            == alrank::TrainConfig {
                execution: model.meta.train_config.execution,
                ..config.train.clone()
            };
        if same_settings && model.meta.objectives == *objectives {
            info!("reusing {}", path.display());
            return Ok(Baseline::from_model(model, splits, objectives, &config.train)?);
        }
        warn!("{} was trained with different settings; retraining", path.display());
    }
    let baseline = run_baseline(splits, objectives, &config.train)?;
    write_baseline(run, &baseline, config)?;
    Ok(baseline)
}

fn evaluate(
    model: &Path,
    data: &Path,
    baseline: &Path,
    split: &str,
    out: Option<&Path>,
    exec: Execution,
) -> anyhow::Result<()> {
    let candidate = BoosterModel::load(model)?;
    let reference = BoosterModel::load(baseline)?;
    let dataset = read_letor_file(data)?;
    let report = report_gains(&candidate, &reference, &dataset, split, exec)?;
    println!("{}", GainReport::table(&[("model", &report)]));
    if let Some(path) = out {
        std::fs::write(path, report.to_csv()).with_context(|| path.display().to_string())?;
    }
    Ok(())
}
