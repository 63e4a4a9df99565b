//! Sequential against parallel execution for the data-parallel kernels.
//!
//! cargo bench -p alrank --bench parallel
//!
//! Built with `--no-default-features` both variants take the sequential
//! path, which gives the fallback's baseline numbers.

use alrank::gbdt::BinnedFeatures;
use alrank::pipeline::{run_baseline, sweep_ub, PipelineConfig, Splits};
use alrank::synthetic::{fixture_objectives, fixture_splits, SyntheticConfig};
use alrank::{fit_tree, objective_lambdas, predict, train, Execution, Guidance, ObjectiveSet, TrainConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fixture() -> (Splits, ObjectiveSet) {
    let (train, valid, test) = fixture_splits(&SyntheticConfig::default()).unwrap();
    let (primary, subs) = fixture_objectives();
    Splits::prepare(train, valid, Some(test), primary, subs).unwrap()
}

fn kernels(c: &mut Criterion) {
    let (splits, objectives) = fixture();
    let ds = &splits.train;
    let grades = ds.labels("rel").unwrap();
    let config = TrainConfig {
        num_trees: 50,
        ..TrainConfig::default()
    };
    let model = train(ds, None, &objectives, Guidance::unconstrained(), &config)
        .unwrap()
        .model;
    let scores = predict(&model, ds.feature_matrix(), ds.feature_count(), Execution::Sequential).unwrap();
    let lambdas = objective_lambdas(ds, grades, &scores, 10, 1.0, Execution::Sequential);

    let mut group = c.benchmark_group("lambdas");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| objective_lambdas(ds, grades, &scores, 10, 1.0, exec))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("fit_tree");
    for (name, exec) in MODES {
        let binned = BinnedFeatures::new(ds, config.max_bins, exec);
        let cfg = TrainConfig {
            execution: exec,
            ..config.clone()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_tree(&binned, &lambdas.gradients, &lambdas.hessians, &cfg).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("predict");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| predict(&model, ds.feature_matrix(), ds.feature_count(), exec).unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let (splits, objectives) = fixture();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = PipelineConfig {
            train: TrainConfig {
                num_trees: 10,
                execution: exec,
                ..TrainConfig::default()
            },
            ..PipelineConfig::default()
        };
        let baseline = run_baseline(&splits, &objectives, &config.train).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep_ub("quality", &splits, &objectives, &baseline, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernels, sweeps);
criterion_main!(benches);
