//! Subsampling inference for linear summaries of estimated effects.
//!
//! Each replicate draws `m` rows without replacement, re-runs the effect
//! estimator on them and regresses the estimates on the covariates by
//! least squares. Coefficient estimates are replicate means; standard
//! errors are the replicate standard deviation scaled by `sqrt(m / n)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, IteEstimator, Method};
use crate::par;
use crate::rng::{self, tag};

pub const INTERCEPT_TERM: &str = "intercept (exposure effect)";
const Z_CRIT: f64 = 1.959_963_984_540_054;
const MAX_DROP_FRACTION: f64 = 0.2;

/// Which rows' estimated effects enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Response {
    #[default]
    All,
    Arm(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub subsample_fraction: f64,
    pub n_replicates: usize,
    pub estimator: EstimatorConfig,
    pub response: Response,
    /// Covariate columns used as regressors; all when `None`.
    pub regressors: Option<Vec<usize>>,
    /// Scale replicate SDs by `sqrt(m / n)`; off reports the raw SD.
    pub rescale: bool,
    pub seed: u64,
    /// Redraws allowed per replicate when a subsample misses an arm.
    pub max_attempts: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            subsample_fraction: 0.1,
            n_replicates: 1000,
            estimator: EstimatorConfig::default_for(Method::SynCf),
            response: Response::All,
            regressors: None,
            rescale: true,
            seed: 0,
            max_attempts: 100,
        }
    }
}

impl InferenceConfig {
    pub fn subsample_size(&self, n: usize) -> usize {
        (self.subsample_fraction * n as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one slope per column.
    pub coefficients: Vec<f64>,
    pub rank: usize,
    /// Column indices (0 = intercept) linearly dependent on earlier ones.
    pub aliased: Vec<usize>,
}

/// Least squares with an intercept. Rank-deficient designs get the
/// minimum-norm solution and list their aliased columns.
pub fn ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(Error::Schema {
            expected: n,
            got: y.len(),
        });
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let b = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (n.max(p + 1) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(&b, tol)
        .map_err(|e| Error::Inference(e.to_string()))?;
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        rank,
        aliased: if rank < p + 1 { aliased_columns(&design) } else { vec![] },
    })
}

/// Greedy Gram-Schmidt: a column is aliased when its residual on the kept
/// columns is negligible relative to its norm.
fn aliased_columns(design: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut aliased = Vec::new();
    for j in 0..design.ncols() {
        let col = design.column(j).into_owned();
        let norm = col.norm();
        let mut r = col;
        for q in &basis {
            let d = q.dot(&r);
            r -= q * d;
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-9 * norm {
            aliased.push(j);
        } else {
            basis.push(r / rn);
        }
    }
    aliased
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
    pub n: usize,
    pub subsample_size: usize,
    pub replicates_used: usize,
    pub replicates_dropped: usize,
    /// Per term, replicates in which the column was aliased.
    pub aliased_counts: Vec<usize>,
    /// Replicate coefficient vectors in replicate order.
    pub replicate_coefficients: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn row(&self, term: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.term == term)
    }

    pub fn intercept(&self) -> &CoefficientRow {
        &self.rows[0]
    }

    /// Normal-theory interval `estimate +- 1.96 se`.
    pub fn interval(row: &CoefficientRow) -> (f64, f64) {
        (row.estimate - Z_CRIT * row.std_error, row.estimate + Z_CRIT * row.std_error)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["term", "estimate", "std_error", "z", "significant"])?;
        for r in &self.rows {
            out.write_record([
                r.term.clone(),
                r.estimate.to_string(),
                r.std_error.to_string(),
                r.z.to_string(),
                r.significant.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

enum ReplicateOutcome {
    Fit(OlsFit),
    Dropped(String),
    Singular(Vec<usize>),
}

pub fn subsample_inference(data: &Dataset, config: &InferenceConfig) -> Result<CoefficientTable> {
    subsample_inference_with(data, config, &config.estimator)
}

/// As [`subsample_inference`] with an arbitrary estimator in place of the
/// configured one.
pub fn subsample_inference_with(
    data: &Dataset,
    config: &InferenceConfig,
    estimator: &dyn IteEstimator,
) -> Result<CoefficientTable> {
    data.validate()?;
    let n = data.n();
    let m = config.subsample_size(n);
    let regressors: Vec<usize> = match &config.regressors {
        Some(r) => r.clone(),
        None => (0..data.p()).collect(),
    };
    if let Some(&bad) = regressors.iter().find(|&&j| j >= data.p()) {
        return Err(Error::config(format!("regressor column {bad} out of range")));
    }
    if !(config.subsample_fraction > 0.0 && config.subsample_fraction < 1.0) {
        return Err(Error::config("subsample fraction must lie in (0, 1)"));
    }
    if config.n_replicates == 0 {
        return Err(Error::config("need at least one replicate"));
    }
    if m < regressors.len() + 2 {
        return Err(Error::config(format!(
            "subsample size {m} too small for {} regressors",
            regressors.len()
        )));
    }
    let min_arm = estimator.min_arm_size();

    let outcomes = par::map_range(config.n_replicates, |r| {
        let rows = match draw_subsample(data, m, min_arm, config, r) {
            Some(rows) => rows,
            None => return ReplicateOutcome::Dropped("no subsample with both arms".into()),
        };
        let sub = data.subset(&rows);
        let est_seed = rng::derive_seed(config.seed, &[tag::ESTIMATOR, r as u64]);
        let tau = match estimator.estimate_ite(&sub, est_seed) {
            Ok(t) => t,
            Err(e) => return ReplicateOutcome::Dropped(e.to_string()),
        };
        let keep: Vec<usize> = match config.response {
            Response::All => (0..m).collect(),
            Response::Arm(a) => (0..m).filter(|&i| sub.t[i] == a).collect(),
        };
        if keep.len() < regressors.len() + 2 {
            return ReplicateOutcome::Dropped("too few responses".into());
        }
        let cols: Vec<Vec<f64>> = regressors
            .iter()
            .map(|&j| keep.iter().map(|&i| sub.x.get(i, j)).collect())
            .collect();
        let x = Matrix::from_columns(cols).expect("equal lengths");
        let y: Vec<f64> = keep.iter().map(|&i| tau[i]).collect();
        match ols(&x, &y) {
            Ok(fit) if fit.aliased.is_empty() => ReplicateOutcome::Fit(fit),
            Ok(fit) => ReplicateOutcome::Singular(fit.aliased),
            Err(e) => ReplicateOutcome::Dropped(e.to_string()),
        }
    });

    let k = regressors.len() + 1;
    let mut coefs = Vec::new();
    let mut dropped = 0;
    let mut aliased_counts = vec![0; k];
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            ReplicateOutcome::Fit(fit) => coefs.push(fit.coefficients),
            ReplicateOutcome::Dropped(msg) => {
                log::debug!("replicate {r} dropped: {msg}");
                dropped += 1;
            }
            ReplicateOutcome::Singular(cols) => {
                log::debug!("replicate {r} dropped: singular design, aliased {cols:?}");
                for c in cols {
                    aliased_counts[c] += 1;
                }
                dropped += 1;
            }
        }
    }
    if dropped as f64 > MAX_DROP_FRACTION * config.n_replicates as f64 || coefs.len() < 2 {
        return Err(Error::Inference(format!(
            "{dropped} of {} replicates dropped",
            config.n_replicates
        )));
    }

    let scale = if config.rescale {
        (m as f64 / n as f64).sqrt()
    } else {
        1.0
    };
    let used = coefs.len() as f64;
    let rows = (0..k)
        .map(|j| {
            let mean = coefs.iter().map(|c| c[j]).sum::<f64>() / used;
            let var = coefs.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (used - 1.0);
            let se = var.sqrt() * scale;
            let z = mean / se;
            CoefficientRow {
                term: if j == 0 {
                    INTERCEPT_TERM.to_string()
                } else {
                    data.names[regressors[j - 1]].clone()
                },
                estimate: mean,
                std_error: se,
                z,
                significant: z.abs() > Z_CRIT,
            }
        })
        .collect();
    Ok(CoefficientTable {
        rows,
        n,
        subsample_size: m,
        replicates_used: coefs.len(),
        replicates_dropped: dropped,
        aliased_counts,
        replicate_coefficients: coefs,
    })
}

fn draw_subsample(
    data: &Dataset,
    m: usize,
    min_arm: usize,
    config: &InferenceConfig,
    replicate: usize,
) -> Option<Vec<usize>> {
    for attempt in 0..config.max_attempts.max(1) {
        let mut r = rng::stream(config.seed, &[tag::SUBSAMPLE, replicate as u64, attempt as u64]);
        let mut rows = index::sample(&mut r, data.n(), m).into_vec();
        rows.sort_unstable();
        let treated = rows.iter().filter(|&&i| data.t[i] == 1).count();
        if treated >= min_arm && m - treated >= min_arm {
            return Some(rows);
        }
    }
    None
}
