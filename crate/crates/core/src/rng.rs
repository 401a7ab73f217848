//! Per-run random streams derived from `(seed, run index)`.
//!
//! Coin flips, minibatch draws and the initial point use separate ChaCha
//! streams, so changing how often one of them is consumed never shifts the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RunRng {
    pub coin: ChaCha8Rng,
    pub batch: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl RunRng {
    pub fn new(seed: u64, run: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(run.wrapping_mul(3).wrapping_add(k));
            r
        };
        Self {
            coin: stream(0),
            batch: stream(1),
            init: stream(2),
        }
    }
}
