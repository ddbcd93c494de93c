//! Seeded, stream-keyed random number generation.
//!
//! Every random quantity is drawn from a ChaCha stream selected by a
//! `(seed, key)` pair, so per-point draws are independent of evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Derive a child seed, e.g. one per active-learning round.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    stream(seed, key ^ 0x5eed_0000_0000_0000).next_u64()
}
