//! Keyed random streams.
//!
//! Every Monte-Carlo trial draws from its own ChaCha stream addressed by
//! `(seed, block, index)`, so the numbers a trial sees do not depend on how
//! trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the generator for trial `index` of block `block` under `seed`.
///
/// `block` separates independent families of trials sharing a seed (for
/// example the points of a recapture curve).
pub fn stream(seed: u64, block: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&block.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
