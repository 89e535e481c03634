//! Parallel vs sequential execution of the hot paths.
//!
//! With the default `parallel` feature each benchmark runs once in a
//! single-thread rayon pool and once in the global pool. Building with
//! `--no-default-features` gives the plain-loop baseline under the label
//! `sequential-build`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iteforest_core::estimators::{estimate, EstimatorConfig};
use iteforest_core::simbench::{simulate, ModelId, SimModel};
use iteforest_core::synthetic::SyntheticSpec;
use iteforest_core::{Forest, ForestSpec, Mtry};

fn modes() -> Vec<(&'static str, Option<usize>)> {
    if iteforest_core::par::is_parallel() {
        vec![("1-thread", Some(1)), ("pool", None)]
    } else {
        vec![("sequential-build", None)]
    }
}

#[cfg(feature = "parallel")]
fn in_mode<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .unwrap()
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_mode<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn bench_forest(c: &mut Criterion) {
    let sim = simulate(&SimModel::new(ModelId::M1, 500), 1).unwrap();
    let x = sim.dataset.x.clone();
    let y = sim.dataset.y.clone();
    let spec = ForestSpec::new(200, Mtry::Third, 3, 7);
    let forest = Forest::grow(x.clone(), &y, &spec).unwrap();

    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    for (label, threads) in modes() {
        g.bench_with_input(BenchmarkId::new("grow_200_trees", label), &threads, |b, &t| {
            b.iter(|| in_mode(t, || black_box(Forest::grow(x.clone(), &y, &spec).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("predict_matrix", label), &threads, |b, &t| {
            b.iter(|| in_mode(t, || black_box(forest.predict_matrix(&x).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("oob_predictions", label), &threads, |b, &t| {
            b.iter(|| in_mode(t, || black_box(forest.oob_predictions())))
        });
    }
    g.finish();
}

fn bench_estimators(c: &mut Criterion) {
    let sim = simulate(&SimModel::new(ModelId::M2, 500), 2).unwrap();
    let configs = [
        ("cf", EstimatorConfig::Cf(ForestSpec::new(200, Mtry::Third, 3, 1))),
        (
            "syncf",
            EstimatorConfig::SynCf(SyntheticSpec {
                nodesize_grid: vec![1, 10, 50],
                mtry_grid: vec![1, 10],
                base_n_trees: 50,
                final_n_trees: 200,
                ..SyntheticSpec::default_grid()
            }),
        ),
    ];
    let mut g = c.benchmark_group("estimators");
    g.sample_size(10);
    for (name, cfg) in &configs {
        for (label, threads) in modes() {
            g.bench_with_input(BenchmarkId::new(*name, label), &threads, |b, &t| {
                b.iter(|| in_mode(t, || black_box(estimate(&sim.dataset, cfg).unwrap())))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_forest, bench_estimators);
criterion_main!(benches);
