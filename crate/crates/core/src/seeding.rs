//! Seed derivation for independent, reproducible random streams.
//!
//! Every consumer of randomness (site drop, user drop, LOS draws, rollout
//! workers, ...) gets its own ChaCha stream derived from the run seed and a
//! purpose tag, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Values are arbitrary but frozen: changing one changes outputs.
pub mod tag {
    pub const SITES: u64 = 0x5173;
    pub const TN_USERS: u64 = 0x7E05;
    pub const NTN_TERMINALS: u64 = 0x4E77;
    pub const LOS: u64 = 0x1055;
    pub const SHADOWING: u64 = 0x5F5F;
    pub const TN_SHADOWING: u64 = 0x75F5;
    pub const CLUSTERING: u64 = 0xC1A5;
    pub const POLICY_INIT: u64 = 0x1417;
    pub const LEARNER: u64 = 0x1EA7;
    pub const WORKER: u64 = 0x3012;
}

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with any number of integer keys into a new 64-bit seed.
pub fn derive(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

pub fn stream(seed: u64, keys: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive(seed, keys))
}

/// Uniform draw in `[0, 1)` keyed by integers; used for per-link frozen draws
/// that must not depend on evaluation order.
pub fn keyed_uniform(seed: u64, keys: &[u64]) -> f64 {
    (derive(seed, keys) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw keyed by integers (Box-Muller on two keyed uniforms).
pub fn keyed_normal(seed: u64, keys: &[u64]) -> f64 {
    let u1 = keyed_uniform(seed, keys);
    let mut k2 = keys.to_vec();
    k2.push(0xB0C5);
    let u2 = keyed_uniform(seed, &k2);
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (2.0 * std::f64::consts::PI * u2).cos()
}
