//! One-shot modeling: an unconstrained baseline fixes the cost scales,
//! independent 1-D sweeps pick an upper bound per sub-objective on
//! validation data, and a single run applies every bound together. Linear
//! weighting of the same costs is provided for comparison.

mod report;
mod run_dir;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::gbdt::GuidanceSummary;
use crate::metrics::dataset_cost;
use crate::{
    predict, train, ALState, BoosterModel, Constraint, CostScale, Dataset, Error, Guidance, History,
    LinearWeights, ObjectiveSet, ObjectiveSpec, Result, TrainConfig, TrainOutcome,
};

pub use report::{percent_gain, report_gains, GainReport, GainRow, REPORT_CSV_HEADER};
pub use run_dir::{read_build_log, BuildEntry, RunDir, BUILD_LOG, BUILD_LOG_HEADER};

pub const DEFAULT_GRID: [f64; 5] = [0.9, 0.8, 0.7, 0.6, 0.5];
pub const DEFAULT_GOAL: f64 = -1.0;
pub const DEFAULT_MARGIN: f64 = 0.5;
/// Slack on `C̃_t <= b_t` when judging whether a finished model satisfies
/// its bounds.
pub const CONSTRAINT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub mu: f64,
    pub grid: Vec<f64>,
    /// Minimum acceptable primary %-gain on validation.
    pub goal: f64,
    /// Extra percentage points required during the sweep.
    pub margin: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            mu: crate::lagrangian::DEFAULT_MU,
            grid: DEFAULT_GRID.to_vec(),
            goal: DEFAULT_GOAL,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Labeled train / validation / optional test splits with a common width.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Option<Dataset>,
}

impl Splits {
    /// Widens all splits to the same feature count, fits sub-objective grade
    /// bins on the training split and labels every split with them.
    pub fn prepare(
        mut train: Dataset,
        mut valid: Dataset,
        mut test: Option<Dataset>,
        primary: ObjectiveSpec,
        subs: Vec<ObjectiveSpec>,
    ) -> Result<(Splits, ObjectiveSet)> {
        let width = [Some(&train), Some(&valid), test.as_ref()]
            .into_iter()
            .flatten()
            .map(Dataset::feature_count)
            .max()
            .unwrap_or(0);
        train.widen(width)?;
        valid.widen(width)?;
        if let Some(t) = test.as_mut() {
            t.widen(width)?;
        }
        let objectives = ObjectiveSet::fit(primary, subs, &train)?;
        objectives.label(&mut train)?;
        objectives.label(&mut valid)?;
        if let Some(t) = test.as_mut() {
            objectives.label(t)?;
        }
        Ok((Splits { train, valid, test }, objectives))
    }
}

pub struct Baseline {
    pub outcome: TrainOutcome,
    pub scales: CostScale,
    pub valid_report: GainReport,
}

impl Baseline {
    pub fn model(&self) -> &BoosterModel {
        &self.outcome.model
    }

    /// Rebuilds the baseline from a persisted model. Training scores are
    /// recomputed by prediction, which reproduces the in-loop scores
    /// exactly, so the cost scales match the ones from the original run.
    pub fn from_model(model: BoosterModel, splits: &Splits, objectives: &ObjectiveSet, config: &TrainConfig) -> Result<Baseline> {
        if model.meta.objectives != *objectives {
            return Err(Error::Config(
                "baseline model was trained with different objective declarations".into(),
            ));
        }
        if model.meta.guidance != GuidanceSummary::Unconstrained {
            return Err(Error::Config("baseline model is not unconstrained".into()));
        }
        let train = &splits.train;
        let train_scores = predict(&model, train.feature_matrix(), train.feature_count(), config.execution)?;
        let scales = cost_scales(train, objectives, &train_scores, config)?;
        let valid_report = report_gains(&model, &model, &splits.valid, "valid", config.execution)?;
        Ok(Baseline {
            outcome: TrainOutcome {
                model,
                state: None,
                history: History::default(),
                train_scores,
                validation: Vec::new(),
            },
            scales,
            valid_report,
        })
    }
}

/// Trains without constraints and records each sub-objective's raw training
/// cost as its scale `Z_t`.
pub fn run_baseline(splits: &Splits, objectives: &ObjectiveSet, config: &TrainConfig) -> Result<Baseline> {
    let outcome = train(&splits.train, Some(&splits.valid), objectives, Guidance::unconstrained(), config)?;
    let scales = cost_scales(&splits.train, objectives, &outcome.train_scores, config)?;
    let valid_report = report_gains(
        &outcome.model,
        &outcome.model,
        &splits.valid,
        "valid",
        config.execution,
    )?;
    info!("baseline trained; scales {:?}", scales.entries);
    Ok(Baseline {
        outcome,
        scales,
        valid_report,
    })
}

/// Raw surrogate cost of `scores` on `train` for every sub-objective.
pub fn cost_scales(
    train: &Dataset,
    objectives: &ObjectiveSet,
    scores: &[f64],
    config: &TrainConfig,
) -> Result<CostScale> {
    let mut scales = CostScale::default();
    for o in &objectives.subs {
        let cost = dataset_cost(
            train,
            train.labels(o.name())?,
            scores,
            o.truncation(),
            config.sigma,
            config.execution,
        );
        scales.insert(o.name(), cost)?;
    }
    Ok(scales)
}

/// Final rescaled training cost per constrained objective.
pub fn final_sub_costs(outcome: &TrainOutcome) -> Vec<f64> {
    outcome
        .history
        .last()
        .map(|r| r.sub_costs.clone())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub bound: f64,
    pub primary_gain: f64,
    pub sub_gain: f64,
    pub train_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub objective: String,
    pub points: Vec<SweepPoint>,
    pub chosen: f64,
    /// False when no grid value met `goal + margin`; `chosen` is then the
    /// loosest grid value.
    pub attainable: bool,
}

pub struct Sweep {
    pub result: SweepResult,
    pub outcomes: Vec<TrainOutcome>,
    pub reports: Vec<GainReport>,
}

/// Picks the tightest bound whose validation primary %-gain is at least
/// `goal + margin`; falls back to the loosest bound.
pub fn select_bound(points: &[SweepPoint], goal: f64, margin: f64) -> (f64, bool) {
    let tightest = points
        .iter()
        .filter(|p| p.primary_gain >= goal + margin)
        .map(|p| p.bound)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.min(b))));
    match tightest {
        Some(b) => (b, true),
        None => (
            points.iter().map(|p| p.bound).fold(f64::NEG_INFINITY, f64::max),
            false,
        ),
    }
}

fn validate_bound(bound: f64) -> Result<()> {
    if bound > 0.0 && bound <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("upper bound {bound} not in (0, 1]")))
    }
}

/// Trains one single-constraint model per grid value (concurrently) and
/// chooses the bound for `objective`.
pub fn sweep_ub(
    objective: &str,
    splits: &Splits,
    objectives: &ObjectiveSet,
    baseline: &Baseline,
    config: &PipelineConfig,
) -> Result<Sweep> {
    if config.grid.is_empty() {
        return Err(Error::Config(format!("empty upper-bound grid for {objective}")));
    }
    for &b in &config.grid {
        validate_bound(b)?;
    }
    objectives.sub(objective)?;
    let exec = config.train.execution;
    let runs = exec.map(&config.grid, |&bound| -> Result<(TrainOutcome, GainReport)> {
        let state = ALState::new(&[Constraint::new(objective, bound)], config.mu, &baseline.scales)?;
        let outcome = train(
            &splits.train,
            Some(&splits.valid),
            objectives,
            Guidance::Augmented(state),
            &config.train,
        )?;
        let report = report_gains(&outcome.model, baseline.model(), &splits.valid, "valid", exec)?;
        Ok((outcome, report))
    });

    let mut outcomes = Vec::with_capacity(runs.len());
    let mut reports = Vec::with_capacity(runs.len());
    let mut points = Vec::with_capacity(runs.len());
    for (run, &bound) in runs.into_iter().zip(&config.grid) {
        let (outcome, report): (TrainOutcome, GainReport) = run?;
        points.push(SweepPoint {
            bound,
            primary_gain: report.primary_gain(),
            sub_gain: report.row(objective).map_or(f64::NAN, |r| r.gain_pct),
            train_cost: final_sub_costs(&outcome)[0],
        });
        outcomes.push(outcome);
        reports.push(report);
    }
    let (chosen, attainable) = select_bound(&points, config.goal, config.margin);
    if !attainable {
        info!("{objective}: no bound meets goal {} + margin {}; using {chosen}", config.goal, config.margin);
    }
    log_sweep_monotonicity(objective, &points, config);
    Ok(Sweep {
        result: SweepResult {
            objective: objective.to_string(),
            points,
            chosen,
            attainable,
        },
        outcomes,
        reports,
    })
}

/// Soft check: a tighter qualifying bound should not lose sub-objective gain
/// against a looser one.
fn log_sweep_monotonicity(objective: &str, points: &[SweepPoint], config: &PipelineConfig) {
    let qualifying: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| p.primary_gain >= config.goal + config.margin)
        .collect();
    for a in &qualifying {
        for b in &qualifying {
            if a.bound < b.bound && a.sub_gain < b.sub_gain {
                log::warn!(
                    "{objective}: bound {} gains {:.3}% < {:.3}% at looser bound {}",
                    a.bound,
                    a.sub_gain,
                    b.sub_gain,
                    b.bound
                );
            }
        }
    }
}

pub struct FullRun {
    pub outcome: TrainOutcome,
    pub bounds: Vec<Constraint>,
    pub valid_report: GainReport,
    pub test_report: Option<GainReport>,
}

impl FullRun {
    /// Final rescaled training cost minus bound, per constraint.
    pub fn slack(&self) -> Vec<f64> {
        final_sub_costs(&self.outcome)
            .iter()
            .zip(&self.bounds)
            .map(|(c, b)| c - b.bound)
            .collect()
    }

    pub fn satisfies_bounds(&self) -> bool {
        self.slack().iter().all(|&s| s <= CONSTRAINT_TOLERANCE)
    }
}

/// The single fully-constrained training run.
pub fn train_full(
    splits: &Splits,
    objectives: &ObjectiveSet,
    bounds: &[Constraint],
    baseline: &Baseline,
    config: &PipelineConfig,
) -> Result<FullRun> {
    for o in &objectives.subs {
        if !bounds.iter().any(|b| b.objective == o.name()) {
            return Err(Error::Config(format!("bounds required: none given for {}", o.name())));
        }
    }
    for b in bounds {
        objectives.sub(&b.objective)?;
        validate_bound(b.bound)?;
    }
    let state = ALState::new(bounds, config.mu, &baseline.scales)?;
    let outcome = train(
        &splits.train,
        Some(&splits.valid),
        objectives,
        Guidance::Augmented(state),
        &config.train,
    )?;
    let (valid_report, test_report) = split_reports(&outcome, splits, baseline, config)?;
    Ok(FullRun {
        outcome,
        bounds: bounds.to_vec(),
        valid_report,
        test_report,
    })
}

fn split_reports(
    outcome: &TrainOutcome,
    splits: &Splits,
    baseline: &Baseline,
    config: &PipelineConfig,
) -> Result<(GainReport, Option<GainReport>)> {
    let exec = config.train.execution;
    let valid = report_gains(&outcome.model, baseline.model(), &splits.valid, "valid", exec)?;
    let test = splits
        .test
        .as_ref()
        .map(|t| report_gains(&outcome.model, baseline.model(), t, "test", exec))
        .transpose()?;
    Ok((valid, test))
}

pub struct LinearRun {
    pub outcome: TrainOutcome,
    pub valid_report: GainReport,
    pub test_report: Option<GainReport>,
}

/// Trains on a fixed weighted sum of the primary and rescaled sub-objective
/// costs. `weights` lists `(objective, weight)` for sub-objectives.
pub fn train_linear_weighting(
    splits: &Splits,
    objectives: &ObjectiveSet,
    primary_weight: f64,
    weights: &[(String, f64)],
    baseline: &Baseline,
    config: &PipelineConfig,
) -> Result<LinearRun> {
    for (name, _) in weights {
        objectives.sub(name)?;
    }
    let weights = LinearWeights::new(primary_weight, weights.to_vec(), baseline.scales.clone())?;
    let outcome = train(
        &splits.train,
        Some(&splits.valid),
        objectives,
        Guidance::Linear(weights),
        &config.train,
    )?;
    let (valid_report, test_report) = split_reports(&outcome, splits, baseline, config)?;
    Ok(LinearRun {
        outcome,
        valid_report,
        test_report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearTrial {
    /// Primary weight first, then one weight per bound.
    pub weights: Vec<f64>,
    pub sub_costs: Vec<f64>,
    pub primary_gain: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSearch {
    pub trials: Vec<LinearTrial>,
}

impl LinearSearch {
    pub fn satisfied_count(&self) -> usize {
        self.trials.iter().filter(|t| t.satisfied).count()
    }

    pub fn satisfied_fraction(&self) -> f64 {
        self.satisfied_count() as f64 / self.trials.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let terms = self.trials.first().map_or(0, |t| t.sub_costs.len());
        let mut header = vec!["trial".to_string(), "w_pm".to_string()];
        header.extend((1..=terms).map(|t| format!("w_{t}")));
        header.extend((1..=terms).map(|t| format!("cost_{t}")));
        header.push("primary_gain".into());
        header.push("satisfied".into());
        let mut out = header.join(",");
        out.push('\n');
        for (i, t) in self.trials.iter().enumerate() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(t.weights.iter().map(f64::to_string));
            row.extend(t.sub_costs.iter().map(f64::to_string));
            row.push(t.primary_gain.to_string());
            row.push(t.satisfied.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Dirichlet(1, …, 1) weight vectors over the primary and bounded
/// sub-objectives, drawn from a seeded generator.
pub fn sample_simplex(dimension: usize, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dimension < 2 {
        return Err(Error::Config("linear weighting needs at least one sub-objective".into()));
    }
    // Normalized unit exponentials are uniform on the simplex.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples)
        .map(|_| {
            let draws: Vec<f64> = (0..dimension).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|x| x / total).collect()
        })
        .collect())
}

/// Random search over linear weights. A trial satisfies the requirements
/// when every rescaled training cost is within [`CONSTRAINT_TOLERANCE`] of
/// its bound and the validation primary %-gain is at least `goal`.
pub fn linear_weight_search(
    splits: &Splits,
    objectives: &ObjectiveSet,
    bounds: &[Constraint],
    baseline: &Baseline,
    config: &PipelineConfig,
    samples: usize,
    seed: u64,
) -> Result<(LinearSearch, Vec<LinearRun>)> {
    let draws = sample_simplex(bounds.len() + 1, samples, seed)?;
    let runs = config.train.execution.map(&draws, |w| {
        let weights: Vec<(String, f64)> = bounds
            .iter()
            .zip(&w[1..])
            .map(|(b, &x)| (b.objective.clone(), x))
            .collect();
        train_linear_weighting(splits, objectives, w[0], &weights, baseline, config)
    });
    let mut trials = Vec::with_capacity(samples);
    let mut kept = Vec::with_capacity(samples);
    for (run, w) in runs.into_iter().zip(draws) {
        let run = run?;
        let sub_costs = final_sub_costs(&run.outcome);
        let primary_gain = run.valid_report.primary_gain();
        let satisfied = sub_costs
            .iter()
            .zip(bounds)
            .all(|(c, b)| *c <= b.bound + CONSTRAINT_TOLERANCE)
            && primary_gain >= config.goal;
        trials.push(LinearTrial {
            weights: w,
            sub_costs,
            primary_gain,
            satisfied,
        });
        kept.push(run);
    }
    Ok((LinearSearch { trials }, kept))
}

#[derive(Serialize)]
struct StageConfig<'a> {
    stage: &'a str,
    objective: Option<&'a str>,
    bounds: &'a [Constraint],
    scales: &'a CostScale,
    pipeline: &'a PipelineConfig,
}

pub struct OneShot {
    pub baseline: Baseline,
    pub sweeps: Vec<SweepResult>,
    pub full: FullRun,
}

impl OneShot {
    pub fn chosen_bounds(&self) -> Vec<Constraint> {
        self.sweeps
            .iter()
            .map(|s| Constraint::new(s.objective.clone(), s.chosen))
            .collect()
    }
}

/// Directory name used for one grid value.
pub fn bound_label(bound: f64) -> String {
    bound.to_string()
}

pub fn write_baseline(run: &RunDir, baseline: &Baseline, config: &PipelineConfig) -> Result<()> {
    run.write_stage(
        "baseline",
        "baseline",
        "",
        "",
        &baseline.outcome,
        &[&baseline.valid_report],
        &StageConfig {
            stage: "baseline",
            objective: None,
            bounds: &[],
            scales: &baseline.scales,
            pipeline: config,
        },
    )?;
    let mut scales = serde_json::to_string_pretty(&baseline.scales)?;
    scales.push('\n');
    let path = run.path("baseline/scales.json");
    std::fs::write(&path, scales).map_err(|e| Error::file(&path, e))
}

pub fn write_sweep(run: &RunDir, sweep: &Sweep, baseline: &Baseline, config: &PipelineConfig) -> Result<()> {
    let objective = &sweep.result.objective;
    for ((outcome, report), point) in sweep.outcomes.iter().zip(&sweep.reports).zip(&sweep.result.points) {
        let label = bound_label(point.bound);
        let bounds = [Constraint::new(objective.clone(), point.bound)];
        run.write_stage(
            &format!("sweeps/{objective}/{label}"),
            "sweep",
            objective,
            &label,
            outcome,
            &[report],
            &StageConfig {
                stage: "sweep",
                objective: Some(objective),
                bounds: &bounds,
                scales: &baseline.scales,
                pipeline: config,
            },
        )?;
    }
    let mut summary = String::from("bound,primary_gain,sub_gain,train_cost,chosen\n");
    for p in &sweep.result.points {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            p.bound,
            p.primary_gain,
            p.sub_gain,
            p.train_cost,
            p.bound == sweep.result.chosen
        ));
    }
    let path = run.path(&format!("sweeps/{objective}/summary.csv"));
    std::fs::write(&path, summary).map_err(|e| Error::file(&path, e))
}

pub fn write_full(run: &RunDir, full: &FullRun, baseline: &Baseline, config: &PipelineConfig) -> Result<()> {
    let reports: Vec<&GainReport> = std::iter::once(&full.valid_report)
        .chain(full.test_report.as_ref())
        .collect();
    run.write_stage(
        "full",
        "full",
        "",
        &full
            .bounds
            .iter()
            .map(|b| format!("{}={}", b.objective, b.bound))
            .collect::<Vec<_>>()
            .join(";"),
        &full.outcome,
        &reports,
        &StageConfig {
            stage: "full",
            objective: None,
            bounds: &full.bounds,
            scales: &baseline.scales,
            pipeline: config,
        },
    )
}

/// One sweep per sub-objective, run concurrently and persisted in
/// declaration order.
pub fn run_sweeps(
    splits: &Splits,
    objectives: &ObjectiveSet,
    baseline: &Baseline,
    config: &PipelineConfig,
    run: &RunDir,
) -> Result<Vec<SweepResult>> {
    let names: Vec<&str> = objectives.subs.iter().map(|o| o.name()).collect();
    let sweeps = config
        .train
        .execution
        .map(&names, |name| sweep_ub(name, splits, objectives, baseline, config));
    let mut results = Vec::with_capacity(sweeps.len());
    for sweep in sweeps {
        let sweep = sweep?;
        write_sweep(run, &sweep, baseline, config)?;
        results.push(sweep.result);
    }
    Ok(results)
}

/// Persists every linear-weighting trial under `lw/<trial>/` plus a
/// `lw/trials.csv` summary.
pub fn write_linear_search(
    run: &RunDir,
    search: &LinearSearch,
    runs: &[LinearRun],
    bounds: &[Constraint],
    baseline: &Baseline,
    config: &PipelineConfig,
) -> Result<()> {
    for (i, (trial, lw)) in search.trials.iter().zip(runs).enumerate() {
        let label = format!("{:03}", i + 1);
        let reports: Vec<&GainReport> = std::iter::once(&lw.valid_report)
            .chain(lw.test_report.as_ref())
            .collect();
        let weights = trial
            .weights
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        run.write_stage(
            &format!("lw/{label}"),
            "lw",
            "",
            &weights,
            &lw.outcome,
            &reports,
            &StageConfig {
                stage: "lw",
                objective: None,
                bounds,
                scales: &baseline.scales,
                pipeline: config,
            },
        )?;
    }
    let path = run.path("lw/trials.csv");
    std::fs::create_dir_all(run.path("lw")).map_err(|e| Error::file(run.path("lw"), e))?;
    std::fs::write(&path, search.to_csv()).map_err(|e| Error::file(&path, e))
}

/// Baseline, one sweep per sub-objective (concurrently), then the full
/// model, persisted under `run`.
pub fn run_one_shot(
    splits: &Splits,
    objectives: &ObjectiveSet,
    config: &PipelineConfig,
    run: &RunDir,
) -> Result<OneShot> {
    let baseline = run_baseline(splits, objectives, &config.train)?;
    write_baseline(run, &baseline, config)?;
    let results = run_sweeps(splits, objectives, &baseline, config, run)?;
    let bounds: Vec<Constraint> = results
        .iter()
        .map(|s| Constraint::new(s.objective.clone(), s.chosen))
        .collect();
    let full = train_full(splits, objectives, &bounds, &baseline, config)?;
    write_full(run, &full, &baseline, config)?;
    Ok(OneShot {
        baseline,
        sweeps: results,
        full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(bound: f64, primary_gain: f64) -> SweepPoint {
        SweepPoint {
            bound,
            primary_gain,
            sub_gain: 0.0,
            train_cost: bound,
        }
    }

    #[test]
    fn selection_takes_tightest_qualifying_bound() {
        let pts = [point(0.9, -0.1), point(0.7, -0.4), point(0.5, -2.0)];
        assert_eq!(select_bound(&pts, -1.0, 0.5), (0.7, true));
        assert_eq!(select_bound(&pts, -1.0, 0.0), (0.7, true));
        assert_eq!(select_bound(&pts, -3.0, 0.0), (0.5, true));
        assert_eq!(select_bound(&pts, 1.0, 0.5), (0.9, false));
        assert_eq!(select_bound(&[point(1.0, 0.0)], -1.0, 0.5), (1.0, true));
    }

    #[test]
    fn simplex_samples_are_normalized_and_reproducible() {
        let a = sample_simplex(3, 20, 9).unwrap();
        let b = sample_simplex(3, 20, 9).unwrap();
        assert_eq!(a, b);
        for w in &a {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
        assert!(sample_simplex(1, 5, 0).is_err());
    }
}
