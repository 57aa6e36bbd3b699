//! Seed derivation.
//!
//! Every random draw in the crate goes through [`stream`]: a ChaCha8
//! generator seeded with a derived `u64` and switched onto a purpose-specific
//! stream, so that e.g. the bootstrap draws for tree `t` never share a
//! keystream with the epoch shuffles that happen to use the same derived
//! seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers, one per consumer of randomness.
pub mod purpose {
    pub const COHORT: u64 = 1;
    pub const HOLDOUT: u64 = 2;
    pub const KFOLD: u64 = 3;
    pub const SMOTE: u64 = 4;
    pub const ENCODER_INIT: u64 = 5;
    pub const EPOCH_SHUFFLE: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
}

/// Per-index seed derivation (`seed ⊕ index`) used for epochs, trees and folds.
#[inline]
pub fn derive(seed: u64, index: u64) -> u64 {
    seed ^ index
}

pub fn stream(seed: u64, purpose: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}
