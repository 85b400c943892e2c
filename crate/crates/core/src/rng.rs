//! Seeded, splittable random streams.
//!
//! Every random draw in the crate goes through [`stream`], which derives a
//! ChaCha8 generator from a 64-bit seed and a stream id. Work that is sharded
//! (one stream per carpet draw, per net level, per replicate) is therefore
//! independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `id` under `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed.wrapping_add(GOLDEN_GAMMA)));
    rng.set_stream(id);
    rng
}

/// Derive a child seed, e.g. per replicate.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
}
