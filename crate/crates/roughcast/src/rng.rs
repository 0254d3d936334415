//! Seedable, splittable random streams.
//!
//! Every parallelizable unit of work (a sample, a tree, a permutation) gets
//! its own ChaCha8 stream derived from the master seed and the unit's stable
//! coordinates. Results are therefore independent of worker count and
//! iteration order, and identical across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; the de-facto standard 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with stream coordinates into a single 64-bit key.
pub fn mix(seed: u64, coords: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &c in coords {
        acc = splitmix64(acc ^ splitmix64(c));
    }
    acc
}

/// Derives an independent ChaCha8 stream for the given coordinates.
pub fn stream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, coords))
}
