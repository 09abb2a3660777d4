//! Seed derivation for independent, order-free RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hash an ordered list of labeled parts into a 64-bit seed. Each part is
/// length-prefixed so `("ab", "c")` and `("a", "bc")` differ.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

pub fn stream(parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Per-episode stream keyed by (seed, task, variation, episode).
pub fn episode_rng(seed: u64, task: &str, variation: usize, episode: usize) -> ChaCha8Rng {
    stream(&["episode", &seed.to_string(), task, &variation.to_string(), &episode.to_string()])
}
