//! Seeded random substreams.
//!
//! A master seed fans out into independent ChaCha streams indexed by
//! replication and pipeline stage, so toggling one stage (say, noise) never
//! shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Pipeline stage owning a substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Grid = 0,
    Paths = 1,
    Intervals = 2,
    Noise = 3,
    Times = 4,
    Solver = 5,
}

const STAGES: u64 = 8;

/// Independent stream for `(master, replication, stage)`.
pub fn substream(master: u64, replication: u64, stage: Stage) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replication.wrapping_mul(STAGES).wrapping_add(stage as u64));
    rng
}

/// Stream for a single-shot operation keyed only by its seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
