//! Seeded random streams.
//!
//! Every experiment derives its generators from a single `u64` seed plus a
//! stream id, so node draws and noise draws can be replayed independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SilrRng = ChaCha8Rng;

/// Stream used for index-set draws (SVRG, sampling).
pub const ETA_STREAM: u64 = 1;
/// Stream used for observation noise.
pub const NOISE_STREAM: u64 = 2;
/// Stream used for random features and sketches.
pub const FEATURE_STREAM: u64 = 3;

pub fn stream(seed: u64, id: u64) -> SilrRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
