//! Counter-derived random streams.
//!
//! Every Monte Carlo replicate gets its own ChaCha stream selected by
//! `(seed, replicate)`. Streams never overlap, so results do not depend on
//! which worker evaluates which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for replicate `replicate` under the experiment seed `seed`.
pub fn replicate_stream(seed: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Single stream for sequential, non-replicated draws (terrain, one-off samples).
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
