//! Confounded heterogeneous-effect simulations with known ground truth,
//! experiment grids over estimators, and propensity-stratified metrics.

mod experiment;
mod metrics;
mod models;

pub use experiment::{
    external_path, run_experiment, simulate_replicate, CellResult, ExperimentConfig,
    ExperimentResults, Failure,
};
pub use metrics::{
    conditional_metrics, replicate_strata, stratify_by_propensity, Replicate, StratifiedMetrics,
    StratumStat,
};
pub use models::{
    assign_treatment, g, h, linear_predictor, logistic, outcome_and_truth, propensity, simulate,
    simulate_covariates, simulate_with, ModelId, SimModel, SimulatedData, TreatmentModel,
    DEFAULT_SIGMA, N_COVARIATES,
};
