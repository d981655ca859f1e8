//! Counter-derived random substreams.
//!
//! Every Monte Carlo replication owns the ChaCha stream selected by its
//! index, so a draw depends only on `(seed, stream)` and never on how the
//! work was split between threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for replication `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent seed for a named purpose (models, runs, ...).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
