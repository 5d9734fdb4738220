//! Seeded random streams.
//!
//! All randomness comes from [`ChaCha8Rng`] (the ChaCha stream cipher reduced to
//! 8 rounds, as implemented by `rand_chacha`). A stream is addressed by a root
//! seed plus a path of `u64` labels, e.g. `(seed, [MARKET, repetition, category])`.
//! The path is folded into a single 64-bit seed with the SplitMix64 finalizer and
//! then expanded by `ChaCha8Rng::seed_from_u64`. Distinct paths give independent
//! streams, so per-category or per-trial work can run in any order (or in
//! parallel) and still reproduce the sequential result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream labels. Keeping them in one place avoids accidental reuse.
pub mod label {
    pub const MARKET: u64 = 0x4d41_524b;
    pub const RAMHECS: u64 = 0x5241_4d48;
    pub const PERTURB: u64 = 0x5045_5254;
    pub const FIRST_PICK: u64 = 0x4649_5253;
    pub const TOTAL_DISTANCE: u64 = 0x544f_5444;
    pub const REJECTIONS: u64 = 0x5245_4a45;
    pub const EXPERIMENT: u64 = 0x4558_5052;
}

const PATH_SALT: u64 = 0xa076_1d64_78bd_642f;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a label path into a root seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &part| {
        splitmix64(acc ^ splitmix64(part ^ PATH_SALT))
    })
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
