//! Seed derivation. Every random draw in a run descends from one root seed
//! through a named sub-stream, so data, initialisation and shuffling can be
//! reproduced independently of each other.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TrainData,
    EvalData,
    Init,
    Shuffle,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::TrainData => 1,
            Stream::EvalData => 2,
            Stream::Init => 3,
            Stream::Shuffle => 4,
        }
    }
}

/// Generator for one (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of a named sub-stream of `root`.
pub fn derive_seed(root: u64, stream: Stream) -> u64 {
    stream_rng(root, 0x5eed_0000 + stream.id()).next_u64()
}

/// Generator for a named sub-stream of `root`.
pub fn named_rng(root: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream))
}
