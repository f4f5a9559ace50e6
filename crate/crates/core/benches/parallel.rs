//! One worker against the whole pool on the three data-parallel hot spots:
//! cohort simulation, forest training and an ANOVA Monte-Carlo sweep.
//!
//! Built with `--no-default-features` both variants run the sequential loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metatutor_core::exec;
use metatutor_core::forest::{train_forest, ForestConfig};
use metatutor_core::harness::{labeled_cohort, simulate_logged, CorpusConfig};
use metatutor_core::rng;
use metatutor_core::sim::SimConfig;
use metatutor_core::stats::one_way_anova;
use rand::Rng;

fn variants() -> [(&'static str, Option<usize>); 2] {
    [("1-worker", Some(1)), ("all-workers", None)]
}

fn cohort_simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("cohort_simulation");
    g.sample_size(10);
    let config = CorpusConfig::default();
    for (name, workers) in variants() {
        g.bench_function(BenchmarkId::new(name, 400), |b| {
            b.iter(|| exec::with_workers(workers, || simulate_logged(400, 1, &config).unwrap()))
        });
    }
    g.finish();
}

fn forest_training(c: &mut Criterion) {
    let mut g = c.benchmark_group("forest_training");
    g.sample_size(10);
    let data = labeled_cohort(300, [1.0 / 3.0; 3], 2024, &SimConfig::default()).unwrap();
    let config = ForestConfig::default();
    for (name, workers) in variants() {
        g.bench_function(BenchmarkId::new(name, config.n_trees), |b| {
            b.iter(|| exec::with_workers(workers, || train_forest(&data, &config, 7).unwrap()))
        });
    }
    g.finish();
}

/// Share of null replicates (three groups of 30 uniform draws) with p < .05.
fn anova_rejection_rate(replicates: usize) -> f64 {
    let rejected = exec::map_range(replicates, |i| {
        let mut r = rng::stream_rng(11, i as u64);
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..30).map(|_| r.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        one_way_anova(&refs).unwrap().p < 0.05
    });
    rejected.iter().filter(|x| **x).count() as f64 / replicates as f64
}

fn anova_monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("anova_monte_carlo");
    for (name, workers) in variants() {
        g.bench_function(BenchmarkId::new(name, 20_000), |b| {
            b.iter(|| exec::with_workers(workers, || anova_rejection_rate(20_000)))
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    cohort_simulation,
    forest_training,
    anova_monte_carlo
);
criterion_main!(benches);
