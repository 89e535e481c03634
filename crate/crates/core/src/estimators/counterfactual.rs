use super::{EstimatorConfig, IteResult, Method};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestSpec};
use crate::synthetic::{SyntheticForest, SyntheticSpec};

/// Rows of each arm and the full matrices they index into.
struct ArmSplit {
    rows: [Vec<usize>; 2],
    x: [Matrix; 2],
    y: [Vec<f64>; 2],
}

impl ArmSplit {
    fn new(data: &Dataset, min_rows: usize) -> Result<ArmSplit> {
        data.require_both_arms()?;
        let rows = [data.arm_rows(0), data.arm_rows(1)];
        for (arm, r) in rows.iter().enumerate() {
            if r.len() < min_rows {
                return Err(Error::config(format!(
                    "arm {arm} has {} rows, fewer than nodesize {min_rows}",
                    r.len()
                )));
            }
        }
        let x = [data.x.select_rows(&rows[0]), data.x.select_rows(&rows[1])];
        let y = [
            rows[0].iter().map(|&i| data.y[i]).collect(),
            rows[1].iter().map(|&i| data.y[i]).collect(),
        ];
        Ok(ArmSplit { rows, x, y })
    }

    /// Scatters per-arm factual (OOB) and counterfactual (other arm's model)
    /// predictions back to dataset row order.
    fn assemble(
        &self,
        n: usize,
        factual: [Vec<(f64, bool)>; 2],
        counterfactual: [Vec<f64>; 2],
    ) -> (Vec<(f64, bool)>, Vec<f64>) {
        let mut f = vec![(0.0, false); n];
        let mut c = vec![0.0; n];
        for arm in 0..2 {
            for (k, &i) in self.rows[arm].iter().enumerate() {
                f[i] = factual[arm][k];
                c[i] = counterfactual[arm][k];
            }
        }
        (f, c)
    }
}

/// Separate forests per arm; each row is run OOB down its own arm's forest
/// and as new data down the other arm's forest.
pub fn estimate_cf(data: &Dataset, spec: &ForestSpec) -> Result<IteResult> {
    let split = ArmSplit::new(data, spec.nodesize)?;
    let forests = [
        Forest::grow(split.x[0].clone(), &split.y[0], &spec.with_seed(arm_seed(spec.seed, 0)))?,
        Forest::grow(split.x[1].clone(), &split.y[1], &spec.with_seed(arm_seed(spec.seed, 1)))?,
    ];
    let factual = [forests[0].oob_predictions(), forests[1].oob_predictions()];
    let counterfactual = [
        forests[1].predict_matrix(&split.x[0])?,
        forests[0].predict_matrix(&split.x[1])?,
    ];
    let (f, c) = split.assemble(data.n(), factual, counterfactual);
    Ok(IteResult::from_arms(
        Method::Cf,
        &data.t,
        &f,
        &c,
        EstimatorConfig::Cf(spec.clone()),
    ))
}

/// Counterfactual estimator with a synthetic forest per arm.
pub fn estimate_syncf(data: &Dataset, spec: &SyntheticSpec) -> Result<IteResult> {
    let split = ArmSplit::new(data, 1)?;
    let forests = [
        SyntheticForest::grow(&split.x[0], &split.y[0], &spec.with_seed(arm_seed(spec.seed, 0)))?,
        SyntheticForest::grow(&split.x[1], &split.y[1], &spec.with_seed(arm_seed(spec.seed, 1)))?,
    ];
    let factual = [forests[0].oob_predictions(), forests[1].oob_predictions()];
    let counterfactual = [
        forests[1].predict_matrix(&split.x[0])?,
        forests[0].predict_matrix(&split.x[1])?,
    ];
    let (f, c) = split.assemble(data.n(), factual, counterfactual);
    Ok(IteResult::from_arms(
        Method::SynCf,
        &data.t,
        &f,
        &c,
        EstimatorConfig::SynCf(spec.clone()),
    ))
}

fn arm_seed(seed: u64, arm: u64) -> u64 {
    crate::rng::derive_seed(seed, &[crate::rng::tag::ESTIMATOR, arm])
}
