//! Deterministic random streams keyed by integer identifiers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with a path of identifiers into one 64-bit seed.
pub fn derive_seed(seed: u64, ids: &[u64]) -> u64 {
    ids.iter()
        .fold(splitmix64(seed), |acc, &id| splitmix64(acc ^ splitmix64(id)))
}

/// A stream that depends only on `seed` and `ids`, so work units can run in any order.
pub fn stream(seed: u64, ids: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, ids))
}
