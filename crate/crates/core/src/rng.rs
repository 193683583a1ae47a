//! Seeded, platform-independent random streams.
//!
//! All randomness goes through ChaCha8 keyed by a 64-bit seed, so results
//! depend only on the seed and never on the host or thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// A generator for `seed`.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generator for sub-stream `stream` of `seed` (e.g. one per flow iteration).
pub fn substream(seed: u64, stream: u64) -> Rng {
    seeded(derive_seed(seed, stream))
}

/// Mixes `(seed, stream)` into a single seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}
