//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent tasks
//! (pattern draws, trajectories) derive their own stream from the base seed
//! and a task index so results do not depend on scheduling.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream for task `(tag, index)` derived from `seed`.
pub fn stream(seed: u64, tag: u64, index: u64) -> Rng {
    let mixed = splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ index);
    Rng::seed_from_u64(mixed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
