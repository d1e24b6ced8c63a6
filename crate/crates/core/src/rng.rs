//! Seeded random streams.
//!
//! Every random draw site in the crate owns a fixed stream id. A generator for a
//! site is `ChaCha8Rng::seed_from_u64(seed)` switched to that stream, so adding a
//! new draw site never perturbs the numbers produced at existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids, one per logical draw site.
pub mod streams {
    pub const TRUE_B: u64 = 1;
    pub const INPUTS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const UNIFORM_CENTERS: u64 = 5;
    pub const ALS_CENTERS: u64 = 6;
    pub const MEDIAN_SUBSAMPLE: u64 = 7;
    /// Candidate initial matrices; the latent dimension is added so each `d`
    /// gets its own stream.
    pub const INIT_CANDIDATES: u64 = 1 << 16;
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
