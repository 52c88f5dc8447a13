//! Deterministic seed derivation.
//!
//! Every stochastic stage derives an independent child stream from a global
//! seed plus structural indices (material, pair, pixel, step). Streams are
//! therefore stable under any parallel schedule: a pixel or example always
//! sees the same random sequence no matter which thread computes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates consecutive/structured inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a parent seed with up to three structural indices into a child seed.
pub fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut h = splitmix64(seed ^ 0xa076_1d64_78bd_642f);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h
}

/// RNG for a derived stream, e.g. `stream(seed, &[pixel_index])`.
pub fn stream(seed: u64, indices: &[u64]) -> ChaCha8Rng {
    let mut s = seed;
    for (k, &ix) in indices.iter().enumerate() {
        s = mix_seed(s, ix, k as u64 + 1, 0);
    }
    ChaCha8Rng::seed_from_u64(s)
}
