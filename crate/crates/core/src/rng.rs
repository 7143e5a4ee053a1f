//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha8 stream. Replica `i` of a run
//! with master seed `s` uses the generator seeded from `s` with its stream
//! number set to `i`, so replica output never depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a single-stream computation.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replica `index` of the run seeded by `seed`.
pub fn replica_rng(seed: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}
