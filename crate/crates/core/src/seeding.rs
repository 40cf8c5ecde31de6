//! Deterministic seed derivation.
//!
//! Every randomized stage derives its own seed from the global seed and a
//! stage label, so runs are reproducible byte for byte and adding a stage
//! never shifts the streams of the others. Hashing is fixed here (FNV-1a
//! plus a SplitMix64 finalizer) rather than borrowed from the standard
//! library, whose hasher is free to change between releases.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for a named stage: mixes the label into the global seed.
pub fn derive(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(label.as_bytes()))
}

/// Seed for the i-th element of a named stage (restart, episode, draw).
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(seed, label).wrapping_add(splitmix64(index)))
}

/// Stream cipher RNG; identical output on every platform for a given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
