//! Seeded randomness with a pinned algorithm.
//!
//! Every random decision in the crate (weight init, data generation,
//! shuffling for splits and folds) flows through [`Prng`], a thin wrapper
//! around the ChaCha8 stream cipher seeded from a `u64`. The u64-to-float
//! conversion and the Fisher-Yates shuffle are spelled out here so the same
//! seed produces byte-identical results on every platform and across
//! dependency upgrades.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic random generator: ChaCha8 keyed by a u64 seed.
#[derive(Debug, Clone)]
pub struct Prng {
    inner: ChaCha8Rng,
}

impl Prng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Prng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1): top 53 bits of the stream scaled by 2^-53.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    ///
    /// Plain modulo reduction; the tiny bias is irrelevant for shuffling and
    /// data generation, and the mapping never changes.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "Prng::below(0)");
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle, descending index order.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
