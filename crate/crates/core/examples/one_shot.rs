//! Runs the one-shot pipeline and a linear-weighting search on the
//! synthetic fixture and prints the %-gain tables.
//!
//! cargo run --release -p alrank --example one_shot -- [out_dir] [trees] [conflict]
//!
//! Set SHOW_TRIALS=1 to print every linear-weighting trial.

use alrank::pipeline::{linear_weight_search, run_one_shot, GainReport, PipelineConfig, RunDir, Splits};
use alrank::synthetic::{fixture_objectives, fixture_splits, SyntheticConfig};
use alrank::TrainConfig;

fn main() -> alrank::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = args.get(1).cloned().unwrap_or_else(|| "one_shot_run".into());
    let trees: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let conflict: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.6);

    let data = SyntheticConfig {
        conflict,
        ..SyntheticConfig::default()
    };
    let (train, valid, test) = fixture_splits(&data)?;
    let (primary, subs) = fixture_objectives();
    let (splits, objectives) = Splits::prepare(train, valid, Some(test), primary, subs)?;
    let config = PipelineConfig {
        train: TrainConfig {
            num_trees: trees,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };

    let run = RunDir::create(&out)?;
    let shot = run_one_shot(&splits, &objectives, &config, &run)?;
    for s in &shot.sweeps {
        println!("sweep {}: chosen {} (attainable: {})", s.objective, s.chosen, s.attainable);
        for p in &s.points {
            println!(
                "  b={:<4} primary {:+.3}%  sub {:+.3}%  train cost {:.4}",
                p.bound, p.primary_gain, p.sub_gain, p.train_cost
            );
        }
    }
    println!("full model slack vs bounds: {:?}", shot.full.slack());

    let (search, _) = linear_weight_search(
        &splits,
        &objectives,
        &shot.chosen_bounds(),
        &shot.baseline,
        &config,
        50,
        7,
    )?;
    println!(
        "linear weighting: {}/{} trials satisfy the bounds",
        search.satisfied_count(),
        search.trials.len()
    );
    if std::env::var("SHOW_TRIALS").is_ok() {
        print!("{}", search.to_csv());
    }
    let best = search
        .trials
        .iter()
        .zip(0..)
        .filter(|(t, _)| t.satisfied)
        .max_by(|a, b| a.0.primary_gain.total_cmp(&b.0.primary_gain));
    if let Some((t, i)) = best {
        println!("best satisfying LW trial #{}: weights {:?}", i + 1, t.weights);
    }

    let test_report = shot.full.test_report.as_ref().unwrap_or(&shot.full.valid_report);
    println!("\n{}", GainReport::table(&[("AL-LM", test_report)]));
    Ok(())
}
