//! Two-stage synthetic forest.
//!
//! A grid of base-learner forests (one per `(nodesize, mtry)` pair) turns
//! each training row into a vector of OOB predictions, the synthetic
//! features. A final forest is then grown on the original columns plus the
//! synthetic ones. All stages draw tree `t`'s bootstrap from one shared
//! plan, so a row that is OOB for tree `t` is OOB for it in every stage.

use std::sync::Arc;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::forest::{BootstrapPlan, Forest, ForestSpec, Mtry, OobPrediction};
use crate::par;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub nodesize_grid: Vec<usize>,
    pub mtry_grid: Vec<usize>,
    pub base_n_trees: usize,
    pub final_n_trees: usize,
    pub final_mtry: Mtry,
    pub final_nodesize: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::default_grid()
    }
}

impl SyntheticSpec {
    /// nodesize 1-10, 20, 30, 50, 100 crossed with mtry 1, 10, 20.
    pub fn default_grid() -> Self {
        let mut nodesize_grid: Vec<usize> = (1..=10).collect();
        nodesize_grid.extend([20, 30, 50, 100]);
        SyntheticSpec {
            nodesize_grid,
            mtry_grid: vec![1, 10, 20],
            base_n_trees: 250,
            final_n_trees: 1000,
            final_mtry: Mtry::Third,
            final_nodesize: 3,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn n_learners(&self) -> usize {
        self.nodesize_grid.len() * self.mtry_grid.len()
    }

    fn validate(&self) -> Result<()> {
        if self.nodesize_grid.is_empty() || self.mtry_grid.is_empty() {
            return Err(Error::config("synthetic grids must be non-empty"));
        }
        if self.nodesize_grid.contains(&0) || self.mtry_grid.contains(&0) {
            return Err(Error::config("synthetic grid values must be positive"));
        }
        if self.base_n_trees == 0 || self.final_n_trees == 0 {
            return Err(Error::config("synthetic tree counts must be positive"));
        }
        Ok(())
    }

    /// Grid points as `(nodesize, mtry)`, clamped to an `n x p` design.
    fn learner_specs(&self, n: usize, p: usize) -> Vec<ForestSpec> {
        let mut out = Vec::with_capacity(self.n_learners());
        for &nodesize in &self.nodesize_grid {
            for &mtry in &self.mtry_grid {
                let k = out.len() as u64;
                if nodesize > n || mtry > p {
                    log::warn!(
                        "synthetic grid point (nodesize={nodesize}, mtry={mtry}) clamped to n={n}, p={p}"
                    );
                }
                out.push(ForestSpec {
                    n_trees: self.base_n_trees,
                    mtry: Mtry::Count(mtry.min(p)),
                    nodesize: nodesize.min(n),
                    seed: rng::derive_seed(self.seed, &[tag::LEARNER, k]),
                    split_vars: None,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticForest {
    base_learners: Vec<Forest>,
    final_forest: Forest,
    plan: BootstrapPlan,
    /// Training synthetic features, one column per base learner.
    features: Vec<Vec<f64>>,
}

impl SyntheticForest {
    pub fn grow(x: &Matrix, y: &[f64], spec: &SyntheticSpec) -> Result<SyntheticForest> {
        spec.validate()?;
        let (n, p) = (x.n_rows(), x.n_cols());
        if y.len() != n {
            return Err(Error::config("response length differs from row count"));
        }
        if n < 2 {
            return Err(Error::config("synthetic forest needs at least 2 rows"));
        }
        let plan = BootstrapPlan::new(n, rng::derive_seed(spec.seed, &[tag::BOOTSTRAP]));
        let shared = Arc::new(x.clone());
        let specs = spec.learner_specs(n, p);
        let base_learners = par::map_slice(&specs, |s| {
            Forest::grow_with_plan(shared.clone(), y, s, &plan)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let features: Vec<Vec<f64>> = base_learners
            .iter()
            .map(|f| f.oob_predictions().into_iter().map(|(v, _)| v).collect())
            .collect();
        let augmented = x.hstack(&features)?;
        let final_spec = ForestSpec {
            n_trees: spec.final_n_trees,
            mtry: spec.final_mtry,
            nodesize: spec.final_nodesize.min(n),
            seed: rng::derive_seed(spec.seed, &[tag::LEARNER, u64::MAX]),
            split_vars: None,
        };
        let final_forest = Forest::grow_with_plan(augmented, y, &final_spec, &plan)?;
        Ok(SyntheticForest {
            base_learners,
            final_forest,
            plan,
            features,
        })
    }

    pub fn base_learners(&self) -> &[Forest] {
        &self.base_learners
    }

    pub fn final_forest(&self) -> &Forest {
        &self.final_forest
    }

    pub fn bootstrap_plan(&self) -> BootstrapPlan {
        self.plan
    }

    pub fn n_synthetic(&self) -> usize {
        self.base_learners.len()
    }

    /// Synthetic feature `k` of training row `i`.
    pub fn training_feature(&self, row: usize, k: usize) -> f64 {
        self.features[k][row]
    }

    fn n_original(&self) -> usize {
        self.final_forest.n_features() - self.n_synthetic()
    }

    /// Prediction for a new point `x`, or the fully out-of-bag prediction
    /// for training row `i` when `oob_for = Some(i)`.
    pub fn predict(&self, x: &[f64], oob_for: Option<usize>) -> Result<f64> {
        if x.len() != self.n_original() {
            return Err(Error::Schema {
                expected: self.n_original(),
                got: x.len(),
            });
        }
        match oob_for {
            Some(i) => self.predict_oob(i).map(|p| p.value),
            None => {
                let mut z = x.to_vec();
                for f in &self.base_learners {
                    z.push(f.predict(x)?);
                }
                self.final_forest.predict(&z)
            }
        }
    }

    pub fn predict_oob(&self, row: usize) -> Result<OobPrediction> {
        self.final_forest.predict_oob(row)
    }

    /// All-tree predictions for every row of `m` (treated as new data).
    pub fn predict_matrix(&self, m: &Matrix) -> Result<Vec<f64>> {
        let synthetic = self
            .base_learners
            .iter()
            .map(|f| f.predict_matrix(m))
            .collect::<Result<Vec<_>>>()?;
        let augmented = m.hstack(&synthetic)?;
        self.final_forest.predict_matrix(&augmented)
    }

    /// OOB predictions for the training rows (with in-bag fallback flag).
    pub fn oob_predictions(&self) -> Vec<(f64, bool)> {
        self.final_forest.oob_predictions()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| r.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = (0..n).map(|i| x.get(i, 0).sin() + 0.5 * x.get(i, 1)).collect();
        (x, y)
    }

    fn small_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            nodesize_grid: vec![1, 5],
            mtry_grid: vec![1, 3],
            base_n_trees: 30,
            final_n_trees: 60,
            final_mtry: Mtry::Third,
            final_nodesize: 3,
            seed,
        }
    }

    #[test]
    fn single_learner_adds_one_column() {
        let (x, y) = data(40, 1);
        let spec = SyntheticSpec {
            nodesize_grid: vec![40],
            mtry_grid: vec![3],
            ..small_spec(2)
        };
        let sf = SyntheticForest::grow(&x, &y, &spec).unwrap();
        assert_eq!(sf.n_synthetic(), 1);
        assert_eq!(sf.final_forest().n_features(), 4);
        assert!(sf.predict(&[0.0, 0.0, 0.0], None).unwrap().is_finite());
    }

    #[test]
    fn infeasible_grid_points_are_clamped_not_dropped() {
        let (x, y) = data(30, 3);
        let spec = SyntheticSpec {
            nodesize_grid: vec![1, 100],
            mtry_grid: vec![1, 20],
            ..small_spec(4)
        };
        let sf = SyntheticForest::grow(&x, &y, &spec).unwrap();
        assert_eq!(sf.n_synthetic(), 4);
        assert!(sf.base_learners().iter().all(|f| f.mtry() <= 3));
    }

    #[test]
    fn shared_bootstrap_across_stages() {
        let (x, y) = data(50, 5);
        let sf = SyntheticForest::grow(&x, &y, &small_spec(6)).unwrap();
        for t in 0..30 {
            let reference = sf.final_forest().trees()[t].inbag_counts();
            for f in sf.base_learners() {
                assert_eq!(f.trees()[t].inbag_counts(), reference);
            }
        }
    }

    #[test]
    fn training_features_are_base_oob_predictions() {
        let (x, y) = data(50, 7);
        let sf = SyntheticForest::grow(&x, &y, &small_spec(8)).unwrap();
        for (k, f) in sf.base_learners().iter().enumerate() {
            for i in 0..50 {
                let oob = f.predict_oob(i).unwrap().value;
                assert_eq!(sf.training_feature(i, k), oob);
            }
        }
    }

    #[test]
    fn constant_response_everywhere() {
        let (x, _) = data(30, 9);
        let y = vec![-1.25; 30];
        let sf = SyntheticForest::grow(&x, &y, &small_spec(10)).unwrap();
        for k in 0..sf.n_synthetic() {
            assert!((0..30).all(|i| sf.training_feature(i, k) == -1.25));
        }
        assert_eq!(sf.predict(&[0.5, 0.5, 0.5], None).unwrap(), -1.25);
        assert_eq!(sf.predict(&[0.0; 3], Some(3)).unwrap(), -1.25);
    }

    #[test]
    fn batch_matches_pointwise() {
        let (x, y) = data(40, 11);
        let sf = SyntheticForest::grow(&x, &y, &small_spec(12)).unwrap();
        let batch = sf.predict_matrix(&x).unwrap();
        for i in 0..5 {
            assert_eq!(batch[i], sf.predict(&x.row(i), None).unwrap());
        }
    }
}
