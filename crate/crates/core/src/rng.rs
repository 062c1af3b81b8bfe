//! Seed derivation for independent, reproducible random substreams.
//!
//! Every random quantity in the simulator is drawn from a `ChaCha8Rng` whose
//! seed is derived from the experiment seed plus a fixed tag path, so that
//! per-slot channel draws, task arrivals and policy sampling never share a
//! stream and can be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream tags.
pub mod tag {
    pub const USERS: u64 = 0x5553_4552;
    pub const PHASES: u64 = 0x5048_4153;
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const TASKS: u64 = 0x5441_534b;
    pub const POLICY: u64 = 0x504f_4c49;
    pub const INIT: u64 = 0x494e_4954;
    pub const TRAIN_EPISODE: u64 = 0x5452_4550;
    pub const EVAL_EPISODE: u64 = 0x4556_4550;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(base), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
