//! Deterministic seed derivation so parallel workers get disjoint streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a master seed, a stream tag, and
/// an index within the stream.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ index)
}

pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream tags for the per-student sub-seeds.
pub mod stream {
    pub const PROFILE: u64 = 1;
    pub const CORRUPT: u64 = 2;
    pub const REGRESSION_DATA: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const ACQUISITION: u64 = 6;
    pub const PROXY: u64 = 7;
    pub const EVAL: u64 = 8;
}
