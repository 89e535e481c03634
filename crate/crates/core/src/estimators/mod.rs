//! Individual treatment effect estimators.
//!
//! Every estimator models the outcome surface and differences the two
//! predicted potential outcomes. The forest-based ones (VT, VT-I, CF,
//! synCF) predict a training row's factual outcome out-of-bag and its
//! counterfactual outcome from all trees, since the flipped point is new
//! data to the forest.

mod counterfactual;
mod external;
mod honest;
mod twins;

use std::fmt;
use std::str::FromStr;

pub use counterfactual::{estimate_cf, estimate_syncf};
pub use external::{export_tau, import_external_ite, read_tau_file};
pub use honest::{estimate_honest, grow_honest, HonestForest, HonestSpec};
pub use twins::{estimate_vt, estimate_vt_interaction, interaction_design, twin_design};

use crate::bivariate::impute_counterfactuals;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{ForestSpec, Mtry};
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Vt,
    VtInteraction,
    Cf,
    SynCf,
    Bivariate,
    Honest,
    External,
}

impl Method {
    pub const ALL_INTERNAL: [Method; 6] = [
        Method::Vt,
        Method::VtInteraction,
        Method::Cf,
        Method::SynCf,
        Method::Bivariate,
        Method::Honest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vt => "vt",
            Method::VtInteraction => "vti",
            Method::Cf => "cf",
            Method::SynCf => "syncf",
            Method::Bivariate => "bivariate",
            Method::Honest => "honest",
            Method::External => "external",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "vt" => Method::Vt,
            "vti" | "vt-i" | "vt_i" => Method::VtInteraction,
            "cf" => Method::Cf,
            "syncf" => Method::SynCf,
            "bivariate" => Method::Bivariate,
            "honest" => Method::Honest,
            "external" => Method::External,
            other => return Err(Error::config(format!("unknown method '{other}'"))),
        })
    }
}

/// Which potential-outcome predictions were out-of-bag for a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OobFlags {
    pub control: bool,
    pub treated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedPair {
    pub y1_hat: f64,
    pub y0_hat: f64,
    pub y1_oob: bool,
    pub y0_oob: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteResult {
    pub method: Method,
    pub tau_hat: Vec<f64>,
    pub oob_flags: Vec<OobFlags>,
    /// `[y0_hat, y1_hat]` per row, when the method produces them.
    pub potential_outcomes: Option<Vec<[f64; 2]>>,
    pub config: EstimatorConfig,
}

impl IteResult {
    pub fn pair(&self, i: usize) -> Option<PredictedPair> {
        let po = self.potential_outcomes.as_ref()?;
        Some(PredictedPair {
            y0_hat: po[i][0],
            y1_hat: po[i][1],
            y0_oob: self.oob_flags[i].control,
            y1_oob: self.oob_flags[i].treated,
        })
    }

    pub fn mean_tau(&self) -> f64 {
        self.tau_hat.iter().sum::<f64>() / self.tau_hat.len() as f64
    }

    /// Builds a result from factual/counterfactual predictions.
    fn from_arms(
        method: Method,
        t: &[u8],
        factual: &[(f64, bool)],
        counterfactual: &[f64],
        config: EstimatorConfig,
    ) -> IteResult {
        let n = t.len();
        let mut tau_hat = Vec::with_capacity(n);
        let mut oob_flags = Vec::with_capacity(n);
        let mut po = Vec::with_capacity(n);
        for i in 0..n {
            let (fv, oob) = factual[i];
            let cv = counterfactual[i];
            if t[i] == 1 {
                tau_hat.push(fv - cv);
                oob_flags.push(OobFlags {
                    control: false,
                    treated: oob,
                });
                po.push([cv, fv]);
            } else {
                tau_hat.push(cv - fv);
                oob_flags.push(OobFlags {
                    control: oob,
                    treated: false,
                });
                po.push([fv, cv]);
            }
        }
        IteResult {
            method,
            tau_hat,
            oob_flags,
            potential_outcomes: Some(po),
            config,
        }
    }
}

/// Estimator choice together with its tuning.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorConfig {
    Vt(ForestSpec),
    VtInteraction(ForestSpec),
    Cf(ForestSpec),
    SynCf(SyntheticSpec),
    Bivariate { forest: ForestSpec, iterations: usize },
    Honest(HonestSpec),
    External,
}

impl EstimatorConfig {
    /// Default tuning: 1000 trees with mtry = ceil(cols/3); nodesize 3 for
    /// VT/VT-I/CF, 1 for bivariate and honest; 5 bivariate iterations.
    pub fn default_for(method: Method) -> Self {
        let forest = ForestSpec::new(1000, Mtry::Third, 3, 0);
        match method {
            Method::Vt => EstimatorConfig::Vt(forest),
            Method::VtInteraction => EstimatorConfig::VtInteraction(forest),
            Method::Cf => EstimatorConfig::Cf(forest),
            Method::SynCf => EstimatorConfig::SynCf(SyntheticSpec::default_grid()),
            Method::Bivariate => EstimatorConfig::Bivariate {
                forest: ForestSpec {
                    nodesize: 1,
                    ..forest
                },
                iterations: 5,
            },
            Method::Honest => EstimatorConfig::Honest(HonestSpec::default()),
            Method::External => EstimatorConfig::External,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            EstimatorConfig::Vt(_) => Method::Vt,
            EstimatorConfig::VtInteraction(_) => Method::VtInteraction,
            EstimatorConfig::Cf(_) => Method::Cf,
            EstimatorConfig::SynCf(_) => Method::SynCf,
            EstimatorConfig::Bivariate { .. } => Method::Bivariate,
            EstimatorConfig::Honest(_) => Method::Honest,
            EstimatorConfig::External => Method::External,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            EstimatorConfig::Vt(s) => EstimatorConfig::Vt(s.with_seed(seed)),
            EstimatorConfig::VtInteraction(s) => EstimatorConfig::VtInteraction(s.with_seed(seed)),
            EstimatorConfig::Cf(s) => EstimatorConfig::Cf(s.with_seed(seed)),
            EstimatorConfig::SynCf(s) => EstimatorConfig::SynCf(s.with_seed(seed)),
            EstimatorConfig::Bivariate { forest, iterations } => EstimatorConfig::Bivariate {
                forest: forest.with_seed(seed),
                iterations: *iterations,
            },
            EstimatorConfig::Honest(h) => EstimatorConfig::Honest(HonestSpec {
                forest: h.forest.with_seed(seed),
                ..h.clone()
            }),
            EstimatorConfig::External => EstimatorConfig::External,
        }
    }
}

/// Runs the configured estimator on `data`.
pub fn estimate(data: &Dataset, config: &EstimatorConfig) -> Result<IteResult> {
    match config {
        EstimatorConfig::Vt(s) => estimate_vt(data, s),
        EstimatorConfig::VtInteraction(s) => estimate_vt_interaction(data, s),
        EstimatorConfig::Cf(s) => estimate_cf(data, s),
        EstimatorConfig::SynCf(s) => estimate_syncf(data, s),
        EstimatorConfig::Bivariate { forest, iterations } => {
            estimate_bivariate(data, forest, *iterations)
        }
        EstimatorConfig::Honest(h) => estimate_honest(data, h),
        EstimatorConfig::External => Err(Error::config(
            "external estimates are imported from a file, not computed",
        )),
    }
}

/// tau_i = Y_i(1) - Y_i(0) from the completed bivariate pairs; one of the
/// two entries is the observed outcome itself.
pub fn estimate_bivariate(
    data: &Dataset,
    spec: &ForestSpec,
    n_iterations: usize,
) -> Result<IteResult> {
    let state = impute_counterfactuals(data, spec, n_iterations)?;
    let tau_hat = state.y_pair.iter().map(|p| p[1] - p[0]).collect();
    Ok(IteResult {
        method: Method::Bivariate,
        tau_hat,
        oob_flags: vec![OobFlags::default(); data.n()],
        potential_outcomes: Some(state.y_pair),
        config: EstimatorConfig::Bivariate {
            forest: spec.clone(),
            iterations: n_iterations,
        },
    })
}

/// Anything that maps a data set to per-row effect estimates. Subsampling
/// inference is written against this so test oracles can stand in for a
/// forest.
pub trait IteEstimator: Sync {
    fn estimate_ite(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>>;

    /// Minimum rows each arm must have for the estimator to run.
    fn min_arm_size(&self) -> usize {
        1
    }
}

impl IteEstimator for EstimatorConfig {
    fn estimate_ite(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>> {
        estimate(data, &self.with_seed(seed)).map(|r| r.tau_hat)
    }

    fn min_arm_size(&self) -> usize {
        match self {
            EstimatorConfig::Cf(s) => s.nodesize.max(2),
            EstimatorConfig::Honest(_) => 2,
            _ => 1,
        }
    }
}

/// Wraps a closure as an estimator.
pub struct FnEstimator<F>(pub F);

impl<F> IteEstimator for FnEstimator<F>
where
    F: Fn(&Dataset, u64) -> Result<Vec<f64>> + Sync,
{
    fn estimate_ite(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>> {
        (self.0)(data, seed)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL_INTERNAL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bart".parse::<Method>().is_err());
    }

    #[test]
    fn defaults_follow_published_settings() {
        match EstimatorConfig::default_for(Method::Bivariate) {
            EstimatorConfig::Bivariate { forest, iterations } => {
                assert_eq!(forest.nodesize, 1);
                assert_eq!(forest.n_trees, 1000);
                assert_eq!(iterations, 5);
            }
            _ => unreachable!(),
        }
        match EstimatorConfig::default_for(Method::Cf) {
            EstimatorConfig::Cf(s) => assert_eq!((s.n_trees, s.nodesize), (1000, 3)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bivariate_observed_entry_is_exact() {
        let data = test_support::shifted(60, 3, 1.0, 0.1, 4);
        let spec = ForestSpec::new(30, Mtry::Third, 1, 2);
        let r = estimate_bivariate(&data, &spec, 2).unwrap();
        let po = r.potential_outcomes.as_ref().unwrap();
        for i in 0..60 {
            if data.t[i] == 1 {
                assert_eq!(r.tau_hat[i], data.y[i] - po[i][0]);
            } else {
                assert_eq!(r.tau_hat[i], po[i][1] - data.y[i]);
            }
        }
    }
}
