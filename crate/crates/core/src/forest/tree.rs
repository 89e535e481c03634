use rand::seq::index;

use crate::data::Matrix;
use crate::rng::{self, tag};

/// Node of a grown tree. Leaves own a contiguous range of the tree's
/// permuted bootstrap sample, so members are recoverable with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        var: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
        start: u32,
        end: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) samples: Vec<u32>,
    pub(crate) inbag: Vec<u32>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Bootstrap multiplicity of every training row.
    pub fn inbag_counts(&self) -> &[u32] {
        &self.inbag
    }

    #[inline]
    pub fn is_oob(&self, row: usize) -> bool {
        self.inbag[row] == 0
    }

    /// Leaf reached by a point whose `j`-th feature is `feature(j)`.
    #[inline]
    pub fn leaf_with(&self, feature: impl Fn(usize) -> f64) -> usize {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    var,
                    threshold,
                    left,
                    right,
                } => {
                    id = if feature(var as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    }
                }
            }
        }
    }

    pub fn leaf_of(&self, x: &[f64]) -> usize {
        self.leaf_with(|j| x[j])
    }

    pub fn leaf_of_row(&self, m: &Matrix, row: usize) -> usize {
        self.leaf_with(|j| m.get(row, j))
    }

    /// Nodes visited from the root down to the leaf, inclusive.
    pub fn path_of_row(&self, m: &Matrix, row: usize) -> Vec<usize> {
        let mut path = vec![0usize];
        let mut id = 0usize;
        while let Node::Split {
            var,
            threshold,
            left,
            right,
        } = self.nodes[id]
        {
            id = if m.get(row, var as usize) <= threshold {
                left as usize
            } else {
                right as usize
            };
            path.push(id);
        }
        path
    }

    #[inline]
    pub fn leaf_value(&self, leaf: usize) -> f64 {
        match self.nodes[leaf] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// In-bag members of a leaf, repeated by multiplicity.
    pub fn leaf_members(&self, leaf: usize) -> &[u32] {
        match self.nodes[leaf] {
            Node::Leaf { start, end, .. } => &self.samples[start as usize..end as usize],
            Node::Split { .. } => &[],
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(i, _)| i)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub(crate) fn set_leaf_value(&mut self, leaf: usize, new: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[leaf] {
            *value = new;
        }
    }
}

/// A node-splitting statistic. Implementations accumulate sufficient
/// statistics left-to-right along a sorted covariate.
pub trait SplitRule: Sync {
    type Stats: Copy + Default;
    type Context;

    /// Per-node setup; `None` means the node is pure and becomes a leaf.
    fn context(&self, rows: &[u32]) -> Option<Self::Context>;
    fn total(&self, ctx: &Self::Context) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: u32);
    fn subtract(&self, total: &Self::Stats, left: &Self::Stats) -> Self::Stats;
    /// Larger is better; `None` if the partition is inadmissible.
    fn score(&self, ctx: &Self::Context, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
    fn leaf_value(&self, rows: &[u32]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub var: usize,
    pub threshold: f64,
    pub score: f64,
}

/// Exhaustive threshold scan over `candidates` (ascending). Thresholds are
/// midpoints between consecutive distinct values; ties keep the first
/// (lowest variable, smallest threshold) candidate.
pub(crate) fn find_split<R: SplitRule>(
    x: &Matrix,
    rule: &R,
    ctx: &R::Context,
    rows: &[u32],
    candidates: &[usize],
    nodesize: usize,
    scratch: &mut Vec<(f64, u32)>,
) -> Option<SplitChoice> {
    let len = rows.len();
    if len < 2 * nodesize.max(1) {
        return None;
    }
    let total = rule.total(ctx);
    let mut best: Option<SplitChoice> = None;
    for &var in candidates {
        let col = x.column(var);
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (col[r as usize], r)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if scratch[0].0 == scratch[len - 1].0 {
            continue;
        }
        let mut left = R::Stats::default();
        for k in 0..len - 1 {
            rule.add(&mut left, scratch[k].1);
            let n_left = k + 1;
            if n_left < nodesize {
                continue;
            }
            if len - n_left < nodesize {
                break;
            }
            let (lo, hi) = (scratch[k].0, scratch[k + 1].0);
            if lo == hi {
                continue;
            }
            let right = rule.subtract(&total, &left);
            let Some(score) = rule.score(ctx, &left, &right) else {
                continue;
            };
            if best.is_none_or(|b| score > b.score) {
                let mid = lo + (hi - lo) * 0.5;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(SplitChoice {
                    var,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams<'a> {
    pub mtry: usize,
    pub nodesize: usize,
    pub split_vars: &'a [usize],
    pub split_seed: u64,
    pub tree_index: usize,
}

/// Draws the node's candidate variables from the stream
/// `(split seed, tree index, node index)`, ascending.
fn candidates(params: &GrowParams<'_>, node: usize, out: &mut Vec<usize>) {
    out.clear();
    let pool = params.split_vars;
    if params.mtry >= pool.len() {
        out.extend_from_slice(pool);
        return;
    }
    let mut rng = rng::stream(
        params.split_seed,
        &[tag::SPLIT_VARS, params.tree_index as u64, node as u64],
    );
    out.extend(
        index::sample(&mut rng, pool.len(), params.mtry)
            .into_iter()
            .map(|k| pool[k]),
    );
    out.sort_unstable();
}

/// Grows one tree on the expanded bootstrap `sample`, recursing until no
/// admissible split remains.
pub(crate) fn grow_tree<R: SplitRule>(
    x: &Matrix,
    rule: &R,
    inbag: Vec<u32>,
    mut samples: Vec<u32>,
    params: &GrowParams<'_>,
) -> Tree {
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        start: 0,
        end: samples.len() as u32,
    }];
    let mut stack = vec![(0usize, 0usize, samples.len())];
    let mut scratch = Vec::with_capacity(samples.len());
    let mut cand = Vec::with_capacity(params.mtry);

    while let Some((id, start, end)) = stack.pop() {
        let rows = &samples[start..end];
        let choice = if rows.len() >= 2 * params.nodesize.max(1) {
            rule.context(rows).and_then(|ctx| {
                candidates(params, id, &mut cand);
                find_split(x, rule, &ctx, rows, &cand, params.nodesize, &mut scratch)
            })
        } else {
            None
        };
        match choice {
            None => {
                nodes[id] = Node::Leaf {
                    value: rule.leaf_value(rows),
                    start: start as u32,
                    end: end as u32,
                };
            }
            Some(split) => {
                let col = x.column(split.var);
                let slice = &mut samples[start..end];
                let mut lo = 0usize;
                for k in 0..slice.len() {
                    if col[slice[k] as usize] <= split.threshold {
                        slice.swap(lo, k);
                        lo += 1;
                    }
                }
                let mid = start + lo;
                let left = nodes.len();
                nodes.push(Node::Leaf {
                    value: 0.0,
                    start: start as u32,
                    end: mid as u32,
                });
                nodes.push(Node::Leaf {
                    value: 0.0,
                    start: mid as u32,
                    end: end as u32,
                });
                nodes[id] = Node::Split {
                    var: split.var as u32,
                    threshold: split.threshold,
                    left: left as u32,
                    right: left as u32 + 1,
                };
                stack.push((left + 1, mid, end));
                stack.push((left, start, mid));
            }
        }
    }
    Tree {
        nodes,
        samples,
        inbag,
    }
}
