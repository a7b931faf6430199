//! Seeded randomness.
//!
//! Every random decision in the toolkit is driven by SplitMix64 and consumed
//! through the two primitives below (modulo draw, 53-bit unit draw), so the
//! sequence of choices is reproducible across implementations.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Deterministic generator over a 64-bit seed.
#[derive(Debug, Clone)]
pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Index in `0..bound` as `next_u64() % bound`. `bound` must be nonzero.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }

    /// Uniform real in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli trial; `p = 0` never fires, `p = 1` always fires.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Fisher-Yates shuffle, walking from the last index down to 1.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Derives a child seed from `seed` and a path of indices.
///
/// Each component is folded in as `state = splitmix(state ^ part)`, so
/// `(i, j)` and `(j, i)` give unrelated seeds.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(seed, |state, part| SeededRng::new(state ^ part).next_u64())
}
