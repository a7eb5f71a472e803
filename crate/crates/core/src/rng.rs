//! Seeded, splittable randomness.
//!
//! Every random draw in the crate goes through an [`RngSeed`]. Sub-streams are
//! derived with [`RngSeed::split`], so stage `v` of a run never depends on how
//! many values stage `v - 1` consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Well-known sub-stream indices.
pub mod stream {
    pub const SOURCE: u64 = 1;
    pub const TARGET: u64 = 2;
    pub const SHIFT: u64 = 3;
    pub const MEANS: u64 = 4;
    pub const ENSEMBLE: u64 = 10;
    pub const BATCHES: u64 = 11;
    pub const PRETRAIN: u64 = 12;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        Self(seed)
    }

    /// Derive an independent child seed for sub-stream `index`.
    pub fn split(self, index: u64) -> Self {
        Self(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
