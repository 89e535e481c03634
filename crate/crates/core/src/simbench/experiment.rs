use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::metrics::{replicate_strata, Replicate, StratifiedMetrics, StratumStat};
use super::models::{simulate, ModelId, SimModel, SimulatedData, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::estimators::{estimate, import_external_ite, EstimatorConfig, Method};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub models: Vec<ModelId>,
    pub estimators: Vec<EstimatorConfig>,
    pub n: usize,
    pub replicates: usize,
    pub strata: usize,
    pub sigma: f64,
    pub base_seed: u64,
    /// Directory holding `<model>_<replicate>.txt` effect files for
    /// [`Method::External`].
    pub external_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: ModelId::ALL.to_vec(),
            estimators: vec![],
            n: 500,
            replicates: 50,
            strata: 20,
            sigma: DEFAULT_SIGMA,
            base_seed: 0,
            external_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn replicate_seed(&self, b: usize) -> u64 {
        self.base_seed.wrapping_add(b as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.estimators.is_empty() {
            return Err(Error::config("need at least one model and one estimator"));
        }
        if self.replicates == 0 || self.strata == 0 {
            return Err(Error::config("replicates and strata must be positive"));
        }
        let mut seen = BTreeSet::new();
        for e in &self.estimators {
            if !seen.insert(e.method()) {
                return Err(Error::config(format!("estimator '{}' listed twice", e.method())));
            }
            if e.method() == Method::External && self.external_dir.is_none() {
                return Err(Error::config("external estimator needs external_dir"));
            }
        }
        SimModel {
            model: ModelId::M1,
            sigma: self.sigma,
            n: self.n,
        }
        .validate()
    }

    fn sim_model(&self, model: ModelId) -> SimModel {
        SimModel {
            model,
            sigma: self.sigma,
            n: self.n,
        }
    }
}

/// Path of the externally produced effect file for one replicate.
pub fn external_path(dir: &Path, model: ModelId, replicate: usize) -> PathBuf {
    dir.join(format!("{model}_{replicate}.txt"))
}

/// Simulates the data set used for `(model, replicate)` in an experiment.
pub fn simulate_replicate(config: &ExperimentConfig, model: ModelId, replicate: usize) -> Result<SimulatedData> {
    simulate(&config.sim_model(model), config.replicate_seed(replicate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub model: ModelId,
    pub estimator: Method,
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub model: ModelId,
    pub estimator: Method,
    pub metrics: StratifiedMetrics,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub cells: Vec<CellResult>,
    pub failures: Vec<Failure>,
}

impl ExperimentResults {
    pub fn cell(&self, model: ModelId, estimator: Method) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.estimator == estimator)
    }

    /// Per-stratum table: model, estimator, stratum (1-based), bias, rmse,
    /// count, B_effective.
    pub fn write_table<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "estimator", "stratum", "bias", "rmse", "count", "B_effective"])?;
        for c in &self.cells {
            let m = &c.metrics;
            for k in 0..m.m {
                out.write_record([
                    c.model.to_string(),
                    c.estimator.to_string(),
                    (k + 1).to_string(),
                    m.bias[k].to_string(),
                    m.rmse[k].to_string(),
                    m.stratum_counts[k].to_string(),
                    m.b_effective[k].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "model",
            "estimator",
            "aggregate_rmse",
            "mean_abs_bias",
            "replicates_used",
            "failures",
        ])?;
        for c in &self.cells {
            let failed = self
                .failures
                .iter()
                .filter(|f| f.model == c.model && f.estimator == c.estimator)
                .count();
            out.write_record([
                c.model.to_string(),
                c.estimator.to_string(),
                c.metrics.aggregate_rmse().to_string(),
                c.metrics.mean_abs_bias().to_string(),
                c.replicates_used.to_string(),
                failed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

type Outcome = std::result::Result<Vec<StratumStat>, String>;

/// Runs every estimator on the same simulated data set per replicate and
/// accumulates propensity-stratified metrics per (model, estimator).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let b_total = config.replicates;
    let tasks: Vec<(ModelId, usize)> = config
        .models
        .iter()
        .flat_map(|&m| (0..b_total).map(move |b| (m, b)))
        .collect();

    let outcomes: Vec<Vec<Outcome>> = par::map_range(tasks.len(), |k| {
        let (model, b) = tasks[k];
        run_task(config, model, b)
    });

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (mi, &model) in config.models.iter().enumerate() {
        for (ei, est) in config.estimators.iter().enumerate() {
            let mut strata = Vec::with_capacity(b_total);
            for b in 0..b_total {
                match &outcomes[mi * b_total + b][ei] {
                    Ok(s) => strata.push(s.clone()),
                    Err(msg) => {
                        log::warn!("{model}/{} replicate {b} failed: {msg}", est.method());
                        failures.push(Failure {
                            model,
                            estimator: est.method(),
                            replicate: b,
                            message: msg.clone(),
                        });
                    }
                }
            }
            cells.push(CellResult {
                model,
                estimator: est.method(),
                replicates_used: strata.len(),
                metrics: StratifiedMetrics::from_strata(&strata, config.strata),
            });
        }
    }
    Ok(ExperimentResults { cells, failures })
}

fn run_task(config: &ExperimentConfig, model: ModelId, b: usize) -> Vec<Outcome> {
    let sim = match simulate_replicate(config, model, b) {
        Ok(s) => s,
        Err(e) => return vec![Err(e.to_string()); config.estimators.len()],
    };
    let seed = config.replicate_seed(b);
    config
        .estimators
        .iter()
        .map(|est| {
            let tau_hat = match est {
                EstimatorConfig::External => {
                    let dir = config.external_dir.as_deref().expect("validated");
                    import_external_ite(&external_path(dir, model, b), config.n).map(|r| r.tau_hat)
                }
                other => estimate(&sim.dataset, &other.with_seed(seed)).map(|r| r.tau_hat),
            }
            .map_err(|e| e.to_string())?;
            Ok(replicate_strata(
                &Replicate {
                    tau_hat: &tau_hat,
                    true_tau: &sim.true_tau,
                    propensity: &sim.true_propensity,
                },
                config.strata,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::export_tau;
    use crate::forest::{ForestSpec, Mtry};

    fn small(estimators: Vec<EstimatorConfig>) -> ExperimentConfig {
        ExperimentConfig {
            models: vec![ModelId::M1, ModelId::M3],
            estimators,
            n: 100,
            replicates: 2,
            strata: 10,
            base_seed: 17,
            ..Default::default()
        }
    }

    #[test]
    fn table_shape_and_determinism() {
        let cfg = small(vec![EstimatorConfig::Vt(ForestSpec::new(20, Mtry::Third, 3, 0))]);
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        let mut buf = Vec::new();
        r.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 10);
        let mut again = Vec::new();
        run_experiment(&cfg).unwrap().write_table(&mut again).unwrap();
        assert_eq!(text.as_bytes(), &again[..]);
        for c in &r.cells {
            assert_eq!(c.metrics.stratum_counts.iter().sum::<usize>(), 200);
        }
    }

    #[test]
    fn external_truth_scores_zero_and_missing_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(vec![EstimatorConfig::External]);
        cfg.models = vec![ModelId::M2];
        cfg.external_dir = Some(dir.path().to_path_buf());
        let sim = simulate_replicate(&cfg, ModelId::M2, 0).unwrap();
        export_tau(&external_path(dir.path(), ModelId::M2, 0), &sim.true_tau).unwrap();
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].replicate, 1);
        let c = r.cell(ModelId::M2, Method::External).unwrap();
        assert_eq!(c.replicates_used, 1);
        assert_eq!(c.metrics.aggregate_rmse(), 0.0);
    }

    #[test]
    fn full_scale_is_expressible() {
        for (n, b) in [(500, 1000), (5000, 250)] {
            let cfg = ExperimentConfig {
                n,
                replicates: b,
                strata: 100,
                estimators: vec![EstimatorConfig::default_for(Method::SynCf)],
                ..Default::default()
            };
            cfg.validate().unwrap();
        }
        assert!(small(vec![]).validate().is_err());
    }
}
