//! Seeded randomness.
//!
//! All stochastic operations take an explicit generator; there is no
//! global RNG state anywhere in the crate. Purpose-scoped generators are
//! derived from one run seed by hashing `(seed, purpose)` with FNV-1a,
//! which is stable across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout: seedable, fast, portable.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, purpose: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    for b in purpose.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives the sub-seed for a named purpose from the run seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    fnv1a(seed, purpose)
}

/// A generator for a named purpose, derived from the run seed.
pub fn for_purpose(seed: u64, purpose: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}
