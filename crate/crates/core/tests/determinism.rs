//! Results do not depend on the number of worker threads.

#![cfg(feature = "parallel")]

use iteforest_core::estimators::{estimate, EstimatorConfig, HonestSpec};
use iteforest_core::simbench::{run_experiment, simulate, ExperimentConfig, ModelId, SimModel};
use iteforest_core::synthetic::SyntheticSpec;
use iteforest_core::{ForestSpec, Mtry};

fn pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn configs() -> Vec<EstimatorConfig> {
    let f = ForestSpec::new(30, Mtry::Third, 3, 11);
    vec![
        EstimatorConfig::Vt(f.clone()),
        EstimatorConfig::VtInteraction(f.clone()),
        EstimatorConfig::Cf(f.clone()),
        EstimatorConfig::SynCf(SyntheticSpec {
            nodesize_grid: vec![1, 5],
            mtry_grid: vec![2, 10],
            base_n_trees: 10,
            final_n_trees: 30,
            ..SyntheticSpec::default_grid()
        }),
        EstimatorConfig::Bivariate { forest: ForestSpec { nodesize: 1, ..f.clone() }, iterations: 2 },
        EstimatorConfig::Honest(HonestSpec { forest: ForestSpec { nodesize: 1, ..f }, per_tree_split: false }),
    ]
}

#[test]
fn estimators_identical_across_thread_counts() {
    let sim = simulate(&SimModel::new(ModelId::M3, 150), 8).unwrap();
    for cfg in configs() {
        let one = pool(1, || estimate(&sim.dataset, &cfg).unwrap().tau_hat);
        let four = pool(4, || estimate(&sim.dataset, &cfg).unwrap().tau_hat);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one), bits(&four), "{}", cfg.method());
    }
}

#[test]
fn experiment_identical_across_thread_counts() {
    let cfg = ExperimentConfig {
        models: vec![ModelId::M1, ModelId::M2],
        estimators: configs().into_iter().take(3).collect(),
        n: 100,
        replicates: 3,
        strata: 5,
        base_seed: 4,
        ..Default::default()
    };
    let table = |threads| {
        pool(threads, || {
            let mut buf = Vec::new();
            run_experiment(&cfg).unwrap().write_table(&mut buf).unwrap();
            buf
        })
    };
    assert_eq!(table(1), table(3));
}
