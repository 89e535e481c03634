//! Honest forest: trees are grown on one half of the data with a
//! treatment-difference splitting rule and their terminal nodes are
//! repopulated with the other half, whose arm-wise mean difference gives
//! the node effect.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EstimatorConfig, IteResult, Method, OobFlags};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{grow_tree, ForestSpec, GrowParams, Mtry, Node, SplitRule, Tree};
use crate::par;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct HonestSpec {
    pub forest: ForestSpec,
    /// Redraw the training/held-out halves for every tree instead of once.
    pub per_tree_split: bool,
}

impl Default for HonestSpec {
    fn default() -> Self {
        HonestSpec {
            forest: ForestSpec::new(1000, Mtry::Third, 1, 0),
            per_tree_split: false,
        }
    }
}

/// Maximizes `n_L n_R / n * (tau_L - tau_R)^2`, where `tau_c` is the
/// treated-minus-control mean within child `c`. Each child needs both arms.
struct TreatmentDifferenceRule<'a> {
    y: &'a [f64],
    t: &'a [u8],
}

#[derive(Debug, Clone, Copy, Default)]
struct ArmStats {
    n: [f64; 2],
    sum: [f64; 2],
}

impl ArmStats {
    fn effect(&self) -> Option<f64> {
        (self.n[0] > 0.0 && self.n[1] > 0.0)
            .then(|| self.sum[1] / self.n[1] - self.sum[0] / self.n[0])
    }
}

impl SplitRule for TreatmentDifferenceRule<'_> {
    type Stats = ArmStats;
    type Context = ArmStats;

    fn context(&self, rows: &[u32]) -> Option<ArmStats> {
        let first = self.y[rows[0] as usize];
        if rows.iter().all(|&r| self.y[r as usize] == first) {
            return None;
        }
        let mut s = ArmStats::default();
        for &r in rows {
            self.add(&mut s, r);
        }
        s.effect().map(|_| s)
    }

    fn total(&self, ctx: &ArmStats) -> ArmStats {
        *ctx
    }

    #[inline]
    fn add(&self, s: &mut ArmStats, row: u32) {
        let arm = self.t[row as usize] as usize;
        s.n[arm] += 1.0;
        s.sum[arm] += self.y[row as usize];
    }

    #[inline]
    fn subtract(&self, total: &ArmStats, left: &ArmStats) -> ArmStats {
        ArmStats {
            n: [total.n[0] - left.n[0], total.n[1] - left.n[1]],
            sum: [total.sum[0] - left.sum[0], total.sum[1] - left.sum[1]],
        }
    }

    #[inline]
    fn score(&self, _ctx: &ArmStats, l: &ArmStats, r: &ArmStats) -> Option<f64> {
        let (tl, tr) = (l.effect()?, r.effect()?);
        let (nl, nr) = (l.n[0] + l.n[1], r.n[0] + r.n[1]);
        Some(nl * nr / (nl + nr) * (tl - tr) * (tl - tr))
    }

    fn leaf_value(&self, _rows: &[u32]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct HonestForest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl HonestForest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Forest average of the honest node effects containing `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Schema {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self
            .trees
            .iter()
            .map(|t| t.leaf_value(t.leaf_of(x)))
            .sum::<f64>()
            / self.trees.len() as f64)
    }

    pub fn predict_matrix(&self, m: &Matrix) -> Vec<f64> {
        par::map_range(m.n_rows(), |i| {
            self.trees
                .iter()
                .map(|t| t.leaf_value(t.leaf_of_row(m, i)))
                .sum::<f64>()
                / self.trees.len() as f64
        })
    }
}

/// Random halves `(train, held_out)` of `0..n`.
fn halves(n: usize, seed: u64, coord: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::stream(seed, &[tag::HOLDOUT, coord]);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let held = idx.split_off(n / 2);
    (idx, held)
}

fn has_both_arms(rows: &[usize], t: &[u8]) -> bool {
    rows.iter().any(|&i| t[i] == 1) && rows.iter().any(|&i| t[i] == 0)
}

pub fn grow_honest(data: &Dataset, spec: &HonestSpec) -> Result<HonestForest> {
    data.require_both_arms()?;
    let n = data.n();
    let fs = &spec.forest;
    let (pool, mtry) = fs.validate(n / 2, data.p())?;
    let shared = halves(n, fs.seed, u64::MAX);
    if !spec.per_tree_split && !(has_both_arms(&shared.0, &data.t) && has_both_arms(&shared.1, &data.t)) {
        return Err(Error::config(
            "both arms must appear in the training and held-out halves",
        ));
    }
    let rule = TreatmentDifferenceRule {
        y: &data.y,
        t: &data.t,
    };

    let trees = par::map_range(fs.n_trees, |k| {
        let local;
        let (train, held) = if spec.per_tree_split {
            let mut attempt = 0u64;
            loop {
                let h = halves(n, fs.seed, ((k as u64) << 8) | attempt);
                if (has_both_arms(&h.0, &data.t) && has_both_arms(&h.1, &data.t)) || attempt == 255 {
                    local = h;
                    break;
                }
                attempt += 1;
            }
            (&local.0, &local.1)
        } else {
            (&shared.0, &shared.1)
        };
        let mut brng = rng::stream(fs.seed, &[tag::BOOTSTRAP, k as u64]);
        let mut inbag = vec![0u32; n];
        let mut sample: Vec<u32> = (0..train.len())
            .map(|_| train[brng.random_range(0..train.len())] as u32)
            .collect();
        sample.sort_unstable();
        for &r in &sample {
            inbag[r as usize] += 1;
        }
        let params = GrowParams {
            mtry,
            nodesize: fs.nodesize,
            split_vars: &pool,
            split_seed: fs.seed,
            tree_index: k,
        };
        let mut tree = grow_tree(&data.x, &rule, inbag, sample, &params);
        repopulate(&mut tree, &data.x, &data.y, &data.t, held);
        tree
    });
    Ok(HonestForest {
        trees,
        n_features: data.p(),
    })
}

/// Sets every leaf's value to the held-out treatment difference of the
/// nearest node (itself or an ancestor) whose held-out rows cover both arms.
fn repopulate(tree: &mut Tree, x: &Matrix, y: &[f64], t: &[u8], held: &[usize]) {
    let n_nodes = tree.nodes().len();
    let mut stats = vec![ArmStats::default(); n_nodes];
    for &i in held {
        for node in tree.path_of_row(x, i) {
            let arm = t[i] as usize;
            stats[node].n[arm] += 1.0;
            stats[node].sum[arm] += y[i];
        }
    }
    // children are always created after their parent
    let mut effect = vec![0.0; n_nodes];
    effect[0] = stats[0].effect().unwrap_or(0.0);
    for id in 0..n_nodes {
        if let Node::Split { left, right, .. } = tree.nodes()[id] {
            for child in [left as usize, right as usize] {
                effect[child] = stats[child].effect().unwrap_or(effect[id]);
            }
        }
    }
    let leaves: Vec<usize> = tree.leaves().collect();
    for leaf in leaves {
        tree.set_leaf_value(leaf, effect[leaf]);
    }
}

pub fn estimate_honest(data: &Dataset, spec: &HonestSpec) -> Result<IteResult> {
    let forest = grow_honest(data, spec)?;
    Ok(IteResult {
        method: Method::Honest,
        tau_hat: forest.predict_matrix(&data.x),
        oob_flags: vec![OobFlags::default(); data.n()],
        potential_outcomes: None,
        config: EstimatorConfig::Honest(spec.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::test_support::shifted;

    fn spec(trees: usize, seed: u64) -> HonestSpec {
        HonestSpec {
            forest: ForestSpec::new(trees, Mtry::Third, 1, seed),
            per_tree_split: false,
        }
    }

    #[test]
    fn equal_constant_arms_give_zero() {
        let mut data = shifted(80, 3, 0.0, 0.1, 1);
        data.y = vec![2.0; 80];
        let r = estimate_honest(&data, &spec(20, 1)).unwrap();
        assert!(r.tau_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_shift_is_recovered() {
        let mut data = shifted(2000, 3, 1.0, 0.01, 2);
        let mut r = rng::stream(9, &[]);
        data.y = data
            .t
            .iter()
            .map(|&t| f64::from(t) + 0.01 * (r.random::<f64>() - 0.5))
            .collect();
        let est = estimate_honest(&data, &spec(100, 3)).unwrap();
        let worst = est
            .tau_hat
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn leaves_hold_both_arms_in_training() {
        let data = shifted(200, 3, 1.0, 0.5, 3);
        let f = grow_honest(&data, &spec(10, 4)).unwrap();
        for tree in f.trees() {
            for leaf in tree.leaves() {
                let members = tree.leaf_members(leaf);
                let treated = members.iter().filter(|&&r| data.t[r as usize] == 1).count();
                assert!(treated > 0 && treated < members.len());
            }
        }
    }

    #[test]
    fn held_out_rows_never_train() {
        let data = shifted(100, 2, 0.0, 1.0, 5);
        let s = spec(5, 6);
        let (_, held) = halves(100, s.forest.seed, u64::MAX);
        let f = grow_honest(&data, &s).unwrap();
        for tree in f.trees() {
            assert!(held.iter().all(|&i| tree.inbag_counts()[i] == 0));
        }
    }

    #[test]
    fn per_tree_split_option_runs() {
        let data = shifted(100, 2, 1.0, 0.1, 7);
        let s = HonestSpec {
            per_tree_split: true,
            ..spec(10, 8)
        };
        let r = estimate_honest(&data, &s).unwrap();
        assert!(r.tau_hat.iter().all(|v| v.is_finite()));
    }
}
