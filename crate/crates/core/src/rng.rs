//! Seeded random streams.
//!
//! One run seed fans out into disjoint ChaCha streams, so weight
//! initialization, dropout masks and shuffling never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Balance = 4,
    Projection = 5,
    Fixture = 6,
    Synthetic = 7,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
