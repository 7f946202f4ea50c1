//! Seeded, streamed randomness.
//!
//! Every stochastic component draws from [`WalkRng`]: ChaCha8 keyed by a
//! user seed plus a stream index, so parallel runs get independent,
//! platform-stable sequences and any run can be replayed exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct WalkRng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl WalkRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        WalkRng { inner, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for WalkRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
