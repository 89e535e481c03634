use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

pub const N_COVARIATES: usize = 20;
const N_GAUSSIAN: usize = 11;
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    M1,
    M2,
    M3,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::M1, ModelId::M2, ModelId::M3];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "m1",
            ModelId::M2 => "m2",
            ModelId::M3 => "m3",
        }
    }

    /// Noise-free mean outcome `f_j(x, t)`.
    pub fn mean(self, x: &[f64], t: u8) -> f64 {
        let lin = 0.4 * x[0] + 0.154 * x[1] - 0.152 * x[10] - 0.126 * x[11];
        let control_term = match self {
            ModelId::M1 => lin,
            ModelId::M2 | ModelId::M3 => lin.sin(),
        };
        let gate = match self {
            ModelId::M1 | ModelId::M2 => g(x),
            ModelId::M3 => h(x),
        };
        let mut f = 2.455;
        if t == 0 {
            f -= control_term;
        } else if gate > 0.0 {
            f -= 1.0;
        }
        f
    }

    pub fn true_tau(self, x: &[f64]) -> f64 {
        self.mean(x, 1) - self.mean(x, 0)
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(ModelId::M1),
            "m2" | "2" => Ok(ModelId::M2),
            "m3" | "3" => Ok(ModelId::M3),
            other => Err(Error::config(format!("unknown model '{other}'"))),
        }
    }
}

pub fn g(x: &[f64]) -> f64 {
    0.254 * x[1] * x[1] - 0.152 * x[10] - 0.4 * x[10] * x[10] - 0.126 * x[11]
}

pub fn h(x: &[f64]) -> f64 {
    0.254 * x[2] * x[2] - 0.152 * x[3] - 0.126 * x[4] - 0.4 * x[4] * x[4]
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic treatment-assignment model. Only the intercept is adjustable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreatmentModel {
    pub intercept: f64,
}

impl Default for TreatmentModel {
    fn default() -> Self {
        TreatmentModel { intercept: -2.0 }
    }
}

impl TreatmentModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + 0.028 * x[0] - 0.374 * x[1] - 0.03 * x[2] + 0.118 * x[3]
            - 0.394 * x[10]
            + 0.875 * x[11]
            + 0.9 * x[12]
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        logistic(self.linear_predictor(x))
    }

    pub fn assign(&self, x: &Matrix, seed: u64) -> Vec<u8> {
        let mut r = rng::stream(seed, &[tag::TREATMENT]);
        (0..x.n_rows())
            .map(|i| u8::from(r.random::<f64>() < self.propensity(&x.row(i))))
            .collect()
    }
}

pub fn linear_predictor(x: &[f64]) -> f64 {
    TreatmentModel::default().linear_predictor(x)
}

pub fn propensity(x: &[f64]) -> f64 {
    TreatmentModel::default().propensity(x)
}

pub fn assign_treatment(x: &Matrix, seed: u64) -> Vec<u8> {
    TreatmentModel::default().assign(x, seed)
}

/// `n x 20`: eleven standard normal columns, then nine Bernoulli(1/2).
pub fn simulate_covariates(n: usize, seed: u64) -> Matrix {
    let cols: Vec<Vec<f64>> = (0..N_COVARIATES)
        .map(|j| {
            let mut r = rng::stream(seed, &[tag::COVARIATES, j as u64]);
            if j < N_GAUSSIAN {
                (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
            } else {
                (0..n).map(|_| f64::from(u8::from(r.random::<bool>()))).collect()
            }
        })
        .collect();
    Matrix::from_columns(cols).expect("equal column lengths")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimModel {
    pub model: ModelId,
    pub sigma: f64,
    pub n: usize,
}

impl SimModel {
    pub fn new(model: ModelId, n: usize) -> Self {
        SimModel {
            model,
            sigma: DEFAULT_SIGMA,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n < 2 {
            return Err(Error::config("n must be at least 2"));
        }
        Ok(())
    }
}

/// `(y, true_tau)` with `y = f_j(x, t) + sigma z`.
pub fn outcome_and_truth(model: &SimModel, x: &Matrix, t: &[u8], seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng::stream(seed, &[tag::NOISE]);
    let mut y = Vec::with_capacity(t.len());
    let mut tau = Vec::with_capacity(t.len());
    for (i, &ti) in t.iter().enumerate() {
        let row = x.row(i);
        let z: f64 = StandardNormal.sample(&mut r);
        y.push(model.model.mean(&row, ti) + model.sigma * z);
        tau.push(model.model.true_tau(&row));
    }
    (y, tau)
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub true_tau: Vec<f64>,
    pub true_propensity: Vec<f64>,
}

pub fn simulate(model: &SimModel, seed: u64) -> Result<SimulatedData> {
    simulate_with(model, &TreatmentModel::default(), seed)
}

pub fn simulate_with(model: &SimModel, treatment: &TreatmentModel, seed: u64) -> Result<SimulatedData> {
    model.validate()?;
    let x = simulate_covariates(model.n, seed);
    let t = treatment.assign(&x, seed);
    let (y, true_tau) = outcome_and_truth(model, &x, &t, seed);
    let true_propensity = (0..model.n).map(|i| treatment.propensity(&x.row(i))).collect();
    Ok(SimulatedData {
        dataset: Dataset::new(x, t, y)?,
        true_tau,
        true_propensity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(j: usize, v: f64) -> Vec<f64> {
        let mut x = vec![0.0; N_COVARIATES];
        x[j] = v;
        x
    }

    #[test]
    fn covariate_laws() {
        let x = simulate_covariates(10_000, 3);
        let c12 = x.column(11);
        let mean12 = c12.iter().sum::<f64>() / 1e4;
        assert!((mean12 - 0.5).abs() < 0.02);
        assert!(c12.iter().all(|&v| v == 0.0 || v == 1.0));
        let c1 = x.column(0);
        let m = c1.iter().sum::<f64>() / 1e4;
        let var = c1.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (1e4 - 1.0);
        assert!((var - 1.0).abs() < 0.05);
        assert_eq!(x, simulate_covariates(10_000, 3));
    }

    #[test]
    fn linear_predictor_fixtures() {
        let zero = vec![0.0; N_COVARIATES];
        assert_eq!(linear_predictor(&zero), -2.0);
        assert!((propensity(&zero) - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
        let mut x = zero.clone();
        x[11] = 1.0;
        x[12] = 1.0;
        assert!((linear_predictor(&x) + 0.225).abs() < 1e-12);
        let big = vec![1e6; N_COVARIATES];
        let e = propensity(&big);
        assert!(e > 0.0 && e <= 1.0);
    }

    #[test]
    fn treatment_fraction_at_zero_covariates() {
        let x = Matrix::zeros(10_000, N_COVARIATES);
        let t = assign_treatment(&x, 11);
        let frac = t.iter().map(|&v| f64::from(v)).sum::<f64>() / 1e4;
        assert!((frac - 0.1192).abs() < 0.01, "{frac}");
        assert_eq!(t, assign_treatment(&x, 11));
        let none = TreatmentModel { intercept: -50.0 }.assign(&x, 11);
        assert!(none.iter().all(|&v| v == 0));
    }

    #[test]
    fn outcome_fixtures() {
        let zero = vec![0.0; N_COVARIATES];
        assert_eq!(ModelId::M1.mean(&zero, 0), 2.455);
        assert_eq!(ModelId::M1.mean(&zero, 1), 2.455);
        assert_eq!(ModelId::M1.true_tau(&zero), 0.0);
        let x1 = unit(0, 1.0);
        assert!((ModelId::M1.mean(&x1, 0) - 2.055).abs() < 1e-12);
        assert!((ModelId::M1.true_tau(&x1) - 0.4).abs() < 1e-12);
        assert!((ModelId::M2.true_tau(&x1) - 0.4f64.sin()).abs() < 1e-12);
        // g(x) > 0 switches on the treated penalty
        let x2 = unit(1, 1.0);
        assert!(g(&x2) > 0.0);
        assert!((ModelId::M1.mean(&x2, 1) - 1.455).abs() < 1e-12);
    }

    #[test]
    fn noise_free_truth_and_sigma() {
        let m = SimModel::new(ModelId::M2, 200);
        assert_eq!(m.sigma, 0.1);
        let s = simulate(&m, 5).unwrap();
        for i in 0..200 {
            let row = s.dataset.x.row(i);
            assert_eq!(s.true_tau[i], ModelId::M2.true_tau(&row));
            assert_eq!(s.true_propensity[i], propensity(&row));
            let resid = s.dataset.y[i] - ModelId::M2.mean(&row, s.dataset.t[i]);
            assert!(resid.abs() < 0.6);
        }
        assert!(SimModel { sigma: 0.0, ..m }.validate().is_err());
    }
}
