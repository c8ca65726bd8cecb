//! Deterministic sub-seed derivation.
//!
//! Every parallel unit of work (bootstrap replicate, Monte Carlo repetition,
//! Brownian path) owns a ChaCha8 stream seeded by `sub_seed(master, index)`,
//! so results do not depend on scheduling or thread count. The mixer is
//! SplitMix64's finalizer applied to `master` and then to `master ^ index`,
//! which alternate-language ports can reproduce exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, index))
}
