use rand::Rng;

use crate::rng::{self, tag, StreamRng};

/// Draws `n` rows with replacement and returns the multiplicity of each row.
pub fn bootstrap_sample(n: usize, rng: &mut StreamRng) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

/// Per-tree bootstrap membership derived from `(seed, tree index)`.
///
/// Two forests built from the same plan share in-bag membership tree by
/// tree, which is what keeps "row i is OOB for tree t" meaningful across
/// the stages of a synthetic forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapPlan {
    n: usize,
    seed: u64,
}

impl BootstrapPlan {
    pub fn new(n: usize, seed: u64) -> Self {
        BootstrapPlan { n, seed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self, tree: usize) -> Vec<u32> {
        let mut rng = rng::stream(self.seed, &[tag::BOOTSTRAP, tree as u64]);
        bootstrap_sample(self.n, &mut rng)
    }

    /// In-bag counts plus the expanded sample (row `i` repeated `counts[i]` times).
    pub(crate) fn draw(&self, tree: usize) -> (Vec<u32>, Vec<u32>) {
        let counts = self.counts(tree);
        let mut sample = Vec::with_capacity(self.n);
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                sample.push(i as u32);
            }
        }
        (counts, sample)
    }
}
