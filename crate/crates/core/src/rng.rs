//! Seeded random streams.
//!
//! Every chain draws from a ChaCha8 stream selected by `(seed, chain)`, so
//! chains are reproducible and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Recorded in run summaries.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), stream = chain index";

pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Deterministic 64-bit mix of two words (splitmix64 finalizer).
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
