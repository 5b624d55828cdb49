//! Seeded randomness. Every randomized operation in the crate draws from a
//! [`ChaCha8Rng`] built here, so outputs are a pure function of the seed on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the pair at position `index` of a manifest.
///
/// Derived from the index rather than from scheduling order, so parallel
/// runs reproduce sequential ones.
pub fn pair_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ index as u64
}
