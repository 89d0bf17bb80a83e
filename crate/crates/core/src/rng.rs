//! Seeding helpers. Every stochastic routine takes an explicit RNG; runs derive
//! independent streams from one user seed so that components never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of an independent stream `stream` from `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// A fresh RNG for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}
