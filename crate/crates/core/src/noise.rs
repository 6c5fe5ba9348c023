//! Counter-based Gaussian noise, keyed by step index.
//!
//! The noise vector for step `k` is a pure function of `(seed, k, dim)` and
//! is independent of how many times or in which order it is queried. This is
//! what lets the standard-momentum form and the averaging form consume one
//! and the same noise realization, making their exact equivalence testable.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A reproducible stream of standard-normal vectors, one per step index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard-normal vector for step `step`. Each step maps to its own
    /// cipher stream, so draws are independent across steps.
    pub fn standard_normal(&self, step: u64, dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        (0..dim).map(|_| rng.sample(StandardNormal)).collect()
    }
}
