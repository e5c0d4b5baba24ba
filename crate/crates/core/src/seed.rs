//! Deterministic seed splitting.
//!
//! A master seed is expanded into per-trial seeds with splitmix64, and each
//! trial seed drives one ChaCha8 generator per random component, selected by
//! the ChaCha stream id. Changing how one component draws never shifts the
//! draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random components of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Codes = 1,
    Channels = 2,
    Powers = 3,
    Symbols = 4,
    Noise = 5,
}

/// Seed domains keep pilot (step-size search) trials disjoint from
/// evaluation trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Evaluation = 0x45,
    Pilot = 0x50,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` within `domain`. `cell` separates sweep points.
pub fn trial_seed(master: u64, domain: Domain, cell: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ ((domain as u64) << 56));
    let b = splitmix64(a ^ cell.wrapping_mul(0xd1b5_4a32_d192_ed03));
    splitmix64(b ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(stream as u64);
    rng
}
