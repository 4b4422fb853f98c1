//! Seed derivation for the named random streams used by the simulator.
//!
//! Every stochastic quantity (damage sets, repair times, crew time budgets,
//! generator layouts, GA breeding) draws from its own ChaCha stream derived
//! from a master seed and a fixed tag, so runs are reproducible regardless of
//! evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; used to mix seeds and tags into fresh 64-bit states.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of tags into a single derived seed.
pub fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}

/// A deterministic ChaCha8 stream for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tags))
}

/// Stream tags for the per-episode random streams.
pub mod tag {
    pub const DAMAGE: u64 = 1;
    pub const REPAIR_TIMES: u64 = 2;
    pub const REQUIREMENTS: u64 = 3;
    pub const BUDGETS: u64 = 4;
    pub const ROADS: u64 = 10;
    pub const FEEDER: u64 = 11;
    pub const DEPOTS: u64 = 12;
    pub const GA_BREED: u64 = 20;
    pub const GA_INIT: u64 = 21;
    pub const POLICY: u64 = 30;
}

/// Episode seed for environment `env_index`, repeat `repeat` under `base`.
///
/// Used for common-random-number evaluation: every genome in a generation
/// sees the same episode realizations.
pub fn episode_seed(base: u64, env_index: u64, repeat: u64) -> u64 {
    mix(base, &[0x5eed, env_index, repeat])
}
