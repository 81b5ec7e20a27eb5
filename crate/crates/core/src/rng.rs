//! Seeded random streams.
//!
//! Every random decision in a run derives from one user seed. Independent
//! consumers (initialization, shuffling, negative sampling, tie breaking) read
//! from distinct ChaCha streams so adding draws to one never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Sampling = 3,
    Ties = 4,
    Synthetic = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
