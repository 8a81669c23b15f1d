//! Seeded, splittable random streams.
//!
//! Every consumer (each environment, each network initialiser, the bandit,
//! the bootstrap) draws from its own `(seed, stream)` pair so that adding or
//! removing one consumer never shifts the draws seen by another.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Well-known stream identifiers. Environment `i` uses `ENV_BASE + i`.
pub mod streams {
    pub const POLICY: u64 = 1;
    pub const POLICY_INIT: u64 = 2;
    pub const VALUE_INIT: u64 = 3;
    pub const BANDIT: u64 = 4;
    pub const MINIBATCH: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
    /// Golden-file case generation for reward module `j` uses `FIXTURE_BASE + j`.
    pub const FIXTURE_BASE: u64 = 200;
    /// Reward module `j` of the reward set uses `REWARD_BASE + j`.
    pub const REWARD_BASE: u64 = 100;
    pub const ENV_BASE: u64 = 10_000;
}

/// ChaCha8 keyed by `seed` with the 64-bit stream selector set to `stream`.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child generator on a stream derived from this one's seed.
    pub fn fork(&self, stream: u64) -> Rng {
        Rng::new(self.seed, stream)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Raw 64-bit draw, used to seed derived generators.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform integer in `[lo, hi)`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..hi)
    }

    /// Draw an index from unnormalised non-negative weights.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let total: f64 = probs.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &p) in probs.iter().enumerate() {
            if u < p {
                return i;
            }
            u -= p;
        }
        // Rounding can leave u marginally above the last bucket.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
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
