//! Bagged CART regression forest with recorded in-bag counts.

mod bootstrap;
mod split;
mod tree;

use std::sync::Arc;

pub use bootstrap::{bootstrap_sample, BootstrapPlan};
pub use split::{best_split, Split, VarianceRule};
pub use tree::{Node, SplitChoice, SplitRule, Tree};

pub(crate) use tree::{grow_tree, GrowParams};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Number of candidate variables drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mtry {
    /// `ceil(q / 3)` where `q` is the number of splittable columns.
    #[default]
    Third,
    Count(usize),
}

impl Mtry {
    pub fn resolve(self, n_vars: usize) -> usize {
        match self {
            Mtry::Third => n_vars.div_ceil(3).max(1),
            Mtry::Count(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub mtry: Mtry,
    /// Minimum number of in-bag cases (with multiplicity) per terminal node.
    pub nodesize: usize,
    pub seed: u64,
    /// Restricts splitting to these columns; `None` means all columns.
    pub split_vars: Option<Vec<usize>>,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            n_trees: 1000,
            mtry: Mtry::Third,
            nodesize: 3,
            seed: 0,
            split_vars: None,
        }
    }
}

impl ForestSpec {
    pub fn new(n_trees: usize, mtry: Mtry, nodesize: usize, seed: u64) -> Self {
        ForestSpec {
            n_trees,
            mtry,
            nodesize,
            seed,
            split_vars: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ForestSpec {
            seed,
            ..self.clone()
        }
    }

    /// Checks the spec against an `n x p` design and returns the resolved
    /// split-variable pool and mtry.
    pub fn validate(&self, n: usize, p: usize) -> Result<(Vec<usize>, usize)> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be positive"));
        }
        if self.nodesize == 0 || self.nodesize > n {
            return Err(Error::config(format!(
                "nodesize {} must lie in [1, {n}]",
                self.nodesize
            )));
        }
        let pool: Vec<usize> = match &self.split_vars {
            None => (0..p).collect(),
            Some(v) => {
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                if v.is_empty() || v.iter().any(|&j| j >= p) {
                    return Err(Error::config("split_vars must name existing columns"));
                }
                v
            }
        };
        let mtry = self.mtry.resolve(pool.len());
        if mtry == 0 || mtry > pool.len() {
            return Err(Error::config(format!(
                "mtry {mtry} must lie in [1, {}]",
                pool.len()
            )));
        }
        Ok((pool, mtry))
    }
}

/// OOB prediction for one training row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobPrediction {
    pub value: f64,
    pub n_trees: usize,
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
    spec: ForestSpec,
    mtry: usize,
    training: Arc<Matrix>,
    bootstrap_seed: u64,
    fingerprint: u64,
}

impl Forest {
    /// Grows a regression forest of `y` on `x`.
    pub fn grow(x: impl Into<Arc<Matrix>>, y: &[f64], spec: &ForestSpec) -> Result<Forest> {
        let x = x.into();
        let plan = BootstrapPlan::new(x.n_rows(), spec.seed);
        Self::grow_with_plan(x, y, spec, &plan)
    }

    /// Grows with an externally supplied bootstrap plan; the spec seed then
    /// only drives the per-node variable draws.
    pub fn grow_with_plan(
        x: impl Into<Arc<Matrix>>,
        y: &[f64],
        spec: &ForestSpec,
        plan: &BootstrapPlan,
    ) -> Result<Forest> {
        let x = x.into();
        if y.len() != x.n_rows() {
            return Err(Error::config("response length differs from row count"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("response contains non-finite values"));
        }
        let rule = VarianceRule::new(y);
        Self::grow_with_rule(x, &rule, spec, plan)
    }

    pub(crate) fn grow_with_rule<R: SplitRule>(
        x: Arc<Matrix>,
        rule: &R,
        spec: &ForestSpec,
        plan: &BootstrapPlan,
    ) -> Result<Forest> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if plan.n() != n {
            return Err(Error::config("bootstrap plan size differs from row count"));
        }
        let (pool, mtry) = spec.validate(n, p)?;
        let trees = par::map_range(spec.n_trees, |t| {
            let (inbag, sample) = plan.draw(t);
            let params = GrowParams {
                mtry,
                nodesize: spec.nodesize,
                split_vars: &pool,
                split_seed: spec.seed,
                tree_index: t,
            };
            grow_tree(&x, rule, inbag, sample, &params)
        });
        Ok(Forest {
            trees,
            spec: spec.clone(),
            mtry,
            fingerprint: rng::derive_seed(spec.seed, &[n as u64, p as u64, plan.seed()]),
            bootstrap_seed: plan.seed(),
            training: x,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn spec(&self) -> &ForestSpec {
        &self.spec
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn n_features(&self) -> usize {
        self.training.n_cols()
    }

    pub fn n_training_rows(&self) -> usize {
        self.training.n_rows()
    }

    pub fn training_features(&self) -> &Matrix {
        &self.training
    }

    pub fn bootstrap_plan(&self) -> BootstrapPlan {
        BootstrapPlan::new(self.training.n_rows(), self.bootstrap_seed)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Mean over all trees of the leaf value reached by `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Schema {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.mean_over(|t| t.leaf_value(t.leaf_of(x))))
    }

    /// All-tree prediction for every row of `m`.
    pub fn predict_matrix(&self, m: &Matrix) -> Result<Vec<f64>> {
        if m.n_cols() != self.n_features() {
            return Err(Error::Schema {
                expected: self.n_features(),
                got: m.n_cols(),
            });
        }
        Ok(par::map_range(m.n_rows(), |i| {
            self.mean_over(|t| t.leaf_value(t.leaf_of_row(m, i)))
        }))
    }

    fn mean_over(&self, f: impl Fn(&Tree) -> f64) -> f64 {
        self.trees.iter().map(f).sum::<f64>() / self.trees.len() as f64
    }

    /// Trees for which `row` is out-of-bag, with their leaf value for it.
    pub fn oob_contributions(&self, row: usize) -> Vec<(usize, f64)> {
        let x = &*self.training;
        self.trees
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_oob(row))
            .map(|(k, t)| (k, t.leaf_value(t.leaf_of_row(x, row))))
            .collect()
    }

    /// Average over exactly the trees where `row` was not drawn.
    pub fn predict_oob(&self, row: usize) -> Result<OobPrediction> {
        if row >= self.n_training_rows() {
            return Err(Error::config(format!("row {row} is not a training row")));
        }
        let x = &*self.training;
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in self.trees.iter().filter(|t| t.is_oob(row)) {
            sum += t.leaf_value(t.leaf_of_row(x, row));
            count += 1;
        }
        if count == 0 {
            return Err(Error::NoOobTrees { row });
        }
        Ok(OobPrediction {
            value: sum / count as f64,
            n_trees: count,
        })
    }

    /// OOB predictions for every training row; rows in-bag everywhere fall
    /// back to the all-tree prediction (flag `false`) with a warning.
    pub fn oob_predictions(&self) -> Vec<(f64, bool)> {
        par::map_range(self.n_training_rows(), |i| match self.predict_oob(i) {
            Ok(p) => (p.value, true),
            Err(_) => {
                log::warn!("row {i} has no OOB trees; using in-bag prediction");
                let x = &*self.training;
                (self.mean_over(|t| t.leaf_value(t.leaf_of_row(x, i))), false)
            }
        })
    }
}
