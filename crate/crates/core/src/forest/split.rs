use super::tree::{find_split, SplitRule};
use crate::data::Matrix;

/// CART regression criterion: weighted decrease in within-node sum of
/// squares, `S_L^2/n_L + S_R^2/n_R - S^2/n`.
pub struct VarianceRule<'a> {
    y: &'a [f64],
}

impl<'a> VarianceRule<'a> {
    pub fn new(y: &'a [f64]) -> Self {
        VarianceRule { y }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SumStats {
    n: f64,
    sum: f64,
}

pub struct VarianceContext {
    total: SumStats,
    parent_term: f64,
}

impl SplitRule for VarianceRule<'_> {
    type Stats = SumStats;
    type Context = VarianceContext;

    fn context(&self, rows: &[u32]) -> Option<VarianceContext> {
        let first = self.y[rows[0] as usize];
        if rows.iter().all(|&r| self.y[r as usize] == first) {
            return None;
        }
        let sum: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
        let n = rows.len() as f64;
        Some(VarianceContext {
            total: SumStats { n, sum },
            parent_term: sum * sum / n,
        })
    }

    fn total(&self, ctx: &VarianceContext) -> SumStats {
        ctx.total
    }

    #[inline]
    fn add(&self, stats: &mut SumStats, row: u32) {
        stats.n += 1.0;
        stats.sum += self.y[row as usize];
    }

    #[inline]
    fn subtract(&self, total: &SumStats, left: &SumStats) -> SumStats {
        SumStats {
            n: total.n - left.n,
            sum: total.sum - left.sum,
        }
    }

    #[inline]
    fn score(&self, ctx: &VarianceContext, l: &SumStats, r: &SumStats) -> Option<f64> {
        Some(l.sum * l.sum / l.n + r.sum * r.sum / r.n - ctx.parent_term)
    }

    fn leaf_value(&self, rows: &[u32]) -> f64 {
        rows.iter().map(|&r| self.y[r as usize]).sum::<f64>() / rows.len() as f64
    }
}

/// A chosen split with its decrease in node sum of squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub var: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best variance-reduction split of `rows` over `candidate_vars`.
///
/// `rows` may repeat indices (bootstrap multiplicity). Returns `None` when
/// `y` is constant on the rows or no threshold leaves `nodesize` rows on
/// both sides.
pub fn best_split(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    candidate_vars: &[usize],
    nodesize: usize,
) -> Option<Split> {
    if rows.is_empty() {
        return None;
    }
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let mut vars = candidate_vars.to_vec();
    vars.sort_unstable();
    vars.dedup();
    let rule = VarianceRule::new(y);
    let ctx = rule.context(&rows)?;
    let mut scratch = Vec::with_capacity(rows.len());
    find_split(x, &rule, &ctx, &rows, &vars, nodesize, &mut scratch).map(|c| Split {
        var: c.var,
        threshold: c.threshold,
        gain: c.score,
    })
}
