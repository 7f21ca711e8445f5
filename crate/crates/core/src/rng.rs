//! Seed mixing. Every random object in the crate is keyed by a 64-bit seed,
//! and derived seeds are produced with a splitmix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix two words into a well-distributed seed.
#[inline]
pub fn mix64(a: u64, b: u64) -> u64 {
    finalize(a ^ finalize(b.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Seed for trial `index` of a run keyed by `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix64(master, index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(master: u64, index: u64) -> Rng {
    rng_from_seed(trial_seed(master, index))
}

#[inline]
pub(crate) fn zigzag(i: i64) -> u64 {
    ((i << 1) ^ (i >> 63)) as u64
}
