use std::sync::Arc;

use super::{EstimatorConfig, IteResult, Method};
use crate::data::{Dataset, Matrix};
use crate::error::Result;
use crate::forest::{Forest, ForestSpec, Mtry};

/// `[X, T]`, with the treatment column set to `arm` when given.
pub fn twin_design(data: &Dataset, arm: Option<u8>) -> Matrix {
    let t = treatment_column(data, arm);
    data.x.hstack(&[t]).expect("row counts agree")
}

/// `[X, T, X*T]`; interaction columns follow the (possibly flipped)
/// treatment, so they vanish whenever `T = 0`.
pub fn interaction_design(data: &Dataset, arm: Option<u8>) -> Matrix {
    let t = treatment_column(data, arm);
    let mut extra = Vec::with_capacity(data.p() + 1);
    extra.push(t.clone());
    for j in 0..data.p() {
        extra.push(data.x.column(j).iter().zip(&t).map(|(a, b)| a * b).collect());
    }
    data.x.hstack(&extra).expect("row counts agree")
}

fn treatment_column(data: &Dataset, arm: Option<u8>) -> Vec<f64> {
    match arm {
        Some(a) => vec![f64::from(a); data.n()],
        None => data.t.iter().map(|&t| f64::from(t)).collect(),
    }
}

fn flipped(data: &Dataset) -> Dataset {
    Dataset {
        t: data.t.iter().map(|&t| 1 - t).collect(),
        ..data.clone()
    }
}

/// Single forest on `(X, T)`; the factual outcome is predicted OOB and the
/// virtual twin (treatment flipped) with all trees.
pub fn estimate_vt(data: &Dataset, spec: &ForestSpec) -> Result<IteResult> {
    data.require_both_arms()?;
    twins(data, spec, Method::Vt, twin_design)
}

/// As [`estimate_vt`] on the design `(X, T, X*T)`. An explicit mtry is
/// rescaled by `(2p + 1) / p` so the sampled fraction of columns is kept.
pub fn estimate_vt_interaction(data: &Dataset, spec: &ForestSpec) -> Result<IteResult> {
    data.require_both_arms()?;
    let p = data.p();
    let mut scaled = spec.clone();
    if let Mtry::Count(k) = spec.mtry {
        scaled.mtry = Mtry::Count((k * (2 * p + 1)).div_ceil(p).min(2 * p + 1));
    }
    twins(data, &scaled, Method::VtInteraction, interaction_design)
}

fn twins(
    data: &Dataset,
    spec: &ForestSpec,
    method: Method,
    design: fn(&Dataset, Option<u8>) -> Matrix,
) -> Result<IteResult> {
    let forest = Forest::grow(Arc::new(design(data, None)), &data.y, spec)?;
    let factual = forest.oob_predictions();
    let counterfactual = forest.predict_matrix(&design(&flipped(data), None))?;
    let config = match method {
        Method::Vt => EstimatorConfig::Vt(spec.clone()),
        _ => EstimatorConfig::VtInteraction(spec.clone()),
    };
    Ok(IteResult::from_arms(
        method,
        &data.t,
        &factual,
        &counterfactual,
        config,
    ))
}
