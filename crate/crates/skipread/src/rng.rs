//! Seeded, portable randomness. Every stochastic component draws from a
//! ChaCha8 stream derived from (master seed, purpose tag, index), so runs are
//! bit-identical for a fixed seed regardless of call interleaving.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derive an independent stream. `tag` names the purpose ("phase1", "sweep"),
/// `k` separates instances (epoch, run index). FNV-1a over the tag keeps the
/// derivation platform-independent.
pub fn stream(seed: u64, tag: &str, k: u64) -> Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^= k.wrapping_mul(0x9e3779b97f4a7c15);
    h = h.wrapping_mul(0x100000001b3);
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn root(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
