//! Seed derivation for independent, reproducible random streams.
//!
//! Every stream in a run (world init, audits, each agent's learner and
//! backend session) and every repetition of an experiment gets its own seed
//! derived by mixing a parent seed with small integer labels through the
//! SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels for the random streams owned by one run.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const AUDIT: u64 = 2;
    pub const LEARNER: u64 = 3;
    pub const BACKEND: u64 = 4;
    pub const NETWORK_INIT: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit hash of a sequence of words.
pub fn hash64(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Hashes a text label (e.g. an experiment kind) to one word.
pub fn label64(label: &str) -> u64 {
    // FNV-1a, then mixed.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h)
}

pub fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(parts))
}
