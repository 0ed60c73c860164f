//! Deterministic random streams.
//!
//! Every stochastic stage draws from a ChaCha8 stream whose seed is derived from the
//! master seed and a path of tags (repeat, fold, stage, class ...). Streams for
//! different paths are independent, so stages can run in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

pub const STAGE_FOLDS: u64 = 0x666f_6c64;
pub const STAGE_OMRP: u64 = 0x6f6d_7270;
pub const STAGE_POOL: u64 = 0x706f_6f6c;
pub const STAGE_SPLIT: u64 = 0x7370_6c74;
pub const STAGE_JAYA: u64 = 0x6a61_7961;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn stream(master: u64, path: &[u64]) -> StageRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
