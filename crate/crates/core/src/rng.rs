//! Random streams.
//!
//! Every replicate owns one ChaCha8 generator seeded from its 64-bit seed.
//! Stream 0 drives the dynamics, stream 1 drives network generation, so the
//! graph and the trajectory never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const DYNAMICS_STREAM: u64 = 0;
const NETWORK_STREAM: u64 = 1;

pub fn dynamics_rng(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DYNAMICS_STREAM);
    rng
}

pub fn network_rng(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NETWORK_STREAM);
    rng
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a base seed. Stable across platforms and
/// releases, unlike `std::hash`.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(mix64(base), |acc, &w| mix64(acc ^ mix64(w)))
}
