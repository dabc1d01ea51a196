//! Deterministic seed derivation.
//!
//! Every randomized stage (bootstrap draws, feature subsampling, imposter
//! selection, synthetic walks) gets its own RNG seeded from the master seed
//! plus fixed integer tags. Work units are therefore self-contained and
//! results never depend on thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer step.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`, one splitmix64 round per tag.
pub(crate) fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &t in tags {
        acc = splitmix64(acc ^ t.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    acc
}

/// RNG for one derived stream.
pub(crate) fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tags))
}
