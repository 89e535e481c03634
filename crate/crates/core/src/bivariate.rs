//! Counterfactual imputation with bivariate-response forests.
//!
//! Each row carries the pair `(Y(0), Y(1))`, one entry observed and one
//! missing. Iteration 1 splits on observed entries only and fills the
//! missing entry from OOB terminal-node donors; later iterations regrow on
//! the completed pairs and re-impute from terminal-node means over all
//! trees. Observed entries are never overwritten.

use std::sync::Arc;

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{BootstrapPlan, Forest, ForestSpec, SplitRule, Tree};
use crate::par;
use crate::rng::{self, tag};

/// Sum of the two responses' variance reductions, each standardized by
/// the parent node's sum of squares in that column. Entries flagged
/// unobserved are skipped.
pub(crate) struct BivariateRule<'a> {
    pairs: &'a [[f64; 2]],
    observed: &'a [[bool; 2]],
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PairStats {
    n: [f64; 2],
    sum: [f64; 2],
}

pub(crate) struct PairContext {
    total: PairStats,
    parent_term: [f64; 2],
    parent_ss: [f64; 2],
}

impl SplitRule for BivariateRule<'_> {
    type Stats = PairStats;
    type Context = PairContext;

    fn context(&self, rows: &[u32]) -> Option<PairContext> {
        let mut total = PairStats::default();
        for &r in rows {
            let r = r as usize;
            for j in 0..2 {
                if self.observed[r][j] {
                    let v = self.pairs[r][j];
                    total.n[j] += 1.0;
                    total.sum[j] += v;
                }
            }
        }
        let mut parent_term = [0.0; 2];
        let mut parent_ss = [0.0; 2];
        for j in 0..2 {
            if total.n[j] > 0.0 {
                parent_term[j] = total.sum[j] * total.sum[j] / total.n[j];
                parent_ss[j] = two_pass_ss(rows, |r| {
                    self.observed[r][j].then_some(self.pairs[r][j])
                });
            }
        }
        if parent_ss.iter().all(|&s| s <= 0.0) {
            return None;
        }
        Some(PairContext {
            total,
            parent_term,
            parent_ss,
        })
    }

    fn total(&self, ctx: &PairContext) -> PairStats {
        ctx.total
    }

    #[inline]
    fn add(&self, s: &mut PairStats, row: u32) {
        let r = row as usize;
        for j in 0..2 {
            if self.observed[r][j] {
                s.n[j] += 1.0;
                s.sum[j] += self.pairs[r][j];
            }
        }
    }

    #[inline]
    fn subtract(&self, total: &PairStats, left: &PairStats) -> PairStats {
        PairStats {
            n: [total.n[0] - left.n[0], total.n[1] - left.n[1]],
            sum: [total.sum[0] - left.sum[0], total.sum[1] - left.sum[1]],
        }
    }

    #[inline]
    fn score(&self, ctx: &PairContext, l: &PairStats, r: &PairStats) -> Option<f64> {
        let mut score = 0.0;
        for j in 0..2 {
            if ctx.parent_ss[j] > 0.0 {
                let term = |s: &PairStats| {
                    if s.n[j] > 0.0 {
                        s.sum[j] * s.sum[j] / s.n[j]
                    } else {
                        0.0
                    }
                };
                score += (term(l) + term(r) - ctx.parent_term[j]) / ctx.parent_ss[j];
            }
        }
        Some(score)
    }

    fn leaf_value(&self, _rows: &[u32]) -> f64 {
        0.0
    }
}

fn two_pass_ss(rows: &[u32], value: impl Fn(usize) -> Option<f64>) -> f64 {
    let (mut n, mut sum) = (0.0, 0.0);
    for &r in rows {
        if let Some(v) = value(r as usize) {
            n += 1.0;
            sum += v;
        }
    }
    if n == 0.0 {
        return 0.0;
    }
    let mean = sum / n;
    rows.iter()
        .filter_map(|&r| value(r as usize))
        .map(|v| (v - mean) * (v - mean))
        .sum()
}

/// Bivariate split score of the partition `x[variable] <= threshold` of
/// `rows`. Zero-variance (or fully missing) columns contribute nothing.
pub fn bivariate_split_score(
    x: &Matrix,
    rows: &[usize],
    variable: usize,
    threshold: f64,
    pairs: &[[f64; 2]],
    observed: &[[bool; 2]],
) -> f64 {
    let rule = BivariateRule { pairs, observed };
    let rows32: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let Some(ctx) = rule.context(&rows32) else {
        return 0.0;
    };
    let mut left = PairStats::default();
    for &r in &rows32 {
        if x.get(r as usize, variable) <= threshold {
            rule.add(&mut left, r);
        }
    }
    let right = rule.subtract(&ctx.total, &left);
    rule.score(&ctx, &left, &right).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateState {
    /// Column `j` holds the outcome under treatment `j`.
    pub y_pair: Vec<[f64; 2]>,
    pub observed_mask: Vec<[bool; 2]>,
    pub iteration: usize,
    /// Mean absolute change of imputed entries between successive iterations.
    pub changes: Vec<f64>,
}

impl BivariateState {
    /// Observed entry at column `t_i`, the other marked missing (`NaN`).
    pub fn from_dataset(data: &Dataset) -> Self {
        let n = data.n();
        let mut y_pair = vec![[f64::NAN; 2]; n];
        let mut observed_mask = vec![[false; 2]; n];
        for i in 0..n {
            let arm = data.t[i] as usize;
            y_pair[i][arm] = data.y[i];
            observed_mask[i][arm] = true;
        }
        BivariateState {
            y_pair,
            observed_mask,
            iteration: 0,
            changes: Vec::new(),
        }
    }

    pub fn n_missing(&self) -> usize {
        self.observed_mask
            .iter()
            .flatten()
            .filter(|&&o| !o)
            .count()
    }
}

/// Imputes the counterfactual outcome of every row of `data`.
pub fn impute_counterfactuals(
    data: &Dataset,
    spec: &ForestSpec,
    n_iterations: usize,
) -> Result<BivariateState> {
    data.require_both_arms()?;
    impute_pairs(&data.x, BivariateState::from_dataset(data), spec, n_iterations)
}

/// Runs the iterated imputation on an arbitrary starting state. Entries
/// with `observed_mask = false` are imputed; the rest are preserved.
pub fn impute_pairs(
    x: &Matrix,
    mut state: BivariateState,
    spec: &ForestSpec,
    n_iterations: usize,
) -> Result<BivariateState> {
    let n = x.n_rows();
    if n_iterations == 0 {
        return Err(Error::config("n_iterations must be positive"));
    }
    if state.y_pair.len() != n || state.observed_mask.len() != n {
        return Err(Error::config("state length differs from row count"));
    }
    for j in 0..2 {
        if !state.observed_mask.iter().any(|o| o[j]) {
            return Err(Error::config(format!(
                "treatment arm {j} has no observed outcomes"
            )));
        }
    }
    let original = state.observed_mask.clone();
    let shared = Arc::new(x.clone());
    let all_observed = vec![[true; 2]; n];

    for it in 1..=n_iterations {
        let first = it == 1;
        let split_mask: &[[bool; 2]] = if first { &original } else { &all_observed };
        let iter_seed = rng::derive_seed(spec.seed, &[tag::ITERATION, it as u64]);
        let rule = BivariateRule {
            pairs: &state.y_pair,
            observed: split_mask,
        };
        let forest = Forest::grow_with_rule(
            shared.clone(),
            &rule,
            &spec.with_seed(iter_seed),
            &BootstrapPlan::new(n, iter_seed),
        )?;
        let donors: Vec<DonorMeans> = par::map_slice(forest.trees(), |t| {
            DonorMeans::new(t, &state.y_pair, &original)
        });
        let imputed: Vec<[Option<f64>; 2]> = par::map_range(n, |i| {
            let mut out = [None, None];
            for j in 0..2 {
                if !original[i][j] {
                    out[j] = Some(impute_entry(&forest, &donors, x, i, j, first));
                }
            }
            out
        });

        let mut change = 0.0;
        let mut n_changed = 0usize;
        for (i, entry) in imputed.into_iter().enumerate() {
            for (j, value) in entry.into_iter().enumerate() {
                if let Some(v) = value {
                    if !first {
                        change += (v - state.y_pair[i][j]).abs();
                        n_changed += 1;
                    }
                    state.y_pair[i][j] = v;
                }
            }
        }
        if !first && n_changed > 0 {
            state.changes.push(change / n_changed as f64);
        }
        state.iteration = it;
    }
    state.observed_mask = original;
    Ok(state)
}

/// Per-node donor means of originally observed entries, plus the tree-wide
/// fallback for nodes without donors in a column.
struct DonorMeans {
    node: Vec<[f64; 2]>,
    tree: [f64; 2],
}

impl DonorMeans {
    fn new(tree: &Tree, pairs: &[[f64; 2]], observed: &[[bool; 2]]) -> Self {
        let mut tree_sum = [0.0; 2];
        let mut tree_n = [0.0; 2];
        let mut node = vec![[f64::NAN; 2]; tree.nodes().len()];
        for leaf in tree.leaves() {
            let mut s = [0.0; 2];
            let mut c = [0.0; 2];
            for &r in tree.leaf_members(leaf) {
                let r = r as usize;
                for j in 0..2 {
                    if observed[r][j] {
                        s[j] += pairs[r][j];
                        c[j] += 1.0;
                    }
                }
            }
            for j in 0..2 {
                tree_sum[j] += s[j];
                tree_n[j] += c[j];
                if c[j] > 0.0 {
                    node[leaf][j] = s[j] / c[j];
                }
            }
        }
        let tree_mean = [
            if tree_n[0] > 0.0 { tree_sum[0] / tree_n[0] } else { f64::NAN },
            if tree_n[1] > 0.0 { tree_sum[1] / tree_n[1] } else { f64::NAN },
        ];
        DonorMeans {
            node,
            tree: tree_mean,
        }
    }

    fn get(&self, leaf: usize, j: usize) -> Option<f64> {
        let v = self.node[leaf][j];
        if v.is_finite() {
            Some(v)
        } else if self.tree[j].is_finite() {
            Some(self.tree[j])
        } else {
            None
        }
    }
}

fn impute_entry(
    forest: &Forest,
    donors: &[DonorMeans],
    x: &Matrix,
    row: usize,
    col: usize,
    oob_only: bool,
) -> f64 {
    let average = |use_oob: bool| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (tree, d) in forest.trees().iter().zip(donors) {
            if use_oob && !tree.is_oob(row) {
                continue;
            }
            if let Some(v) = d.get(tree.leaf_of_row(x, row), col) {
                sum += v;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    };
    if oob_only {
        if let Some(v) = average(true) {
            return v;
        }
        log::warn!("row {row} has no OOB trees during imputation; using all trees");
    }
    average(false).expect("each arm has at least one observed donor")
}
