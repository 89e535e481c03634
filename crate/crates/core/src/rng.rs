//! Deterministic random streams keyed by integer coordinates.
//!
//! Every consumer of randomness (a tree's bootstrap, a node's variable
//! draw, a simulation replicate) derives its own ChaCha stream from the run
//! seed and its coordinates, so nothing depends on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub(crate) mod tag {
    pub const BOOTSTRAP: u64 = 0x0b00_7572_6170;
    pub const SPLIT_VARS: u64 = 0x5b11_7a42;
    pub const COVARIATES: u64 = 0xc0_7a41;
    pub const TREATMENT: u64 = 0x7e_a7e0;
    pub const NOISE: u64 = 0x0e_0153;
    pub const ESTIMATOR: u64 = 0xe5_71a7;
    pub const LEARNER: u64 = 0x1ea2_4e42;
    pub const HOLDOUT: u64 = 0x401d0;
    pub const SUBSAMPLE: u64 = 0x5ab5_a4b1e;
    pub const ITERATION: u64 = 0x17e2;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of coordinates into a single 64-bit seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix(seed), |acc, &c| splitmix(acc ^ splitmix(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, coords))
}
