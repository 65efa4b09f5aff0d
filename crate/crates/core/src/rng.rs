//! Deterministic random streams.
//!
//! Every seeded subsystem draws from a ChaCha8 stream so that the same seed
//! yields the same draws on every platform. Integer draws go through `u64`
//! ranges to keep them independent of the target's pointer width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Combine a base seed with a path of integers into a new seed.
///
/// Uses the SplitMix64 finalizer after each step, so `(seed, [a, b])` and
/// `(seed, [b, a])` give unrelated streams.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix(seed ^ 0x5851_f42d_4c95_7f2d);
    for &part in parts {
        state = splitmix(state ^ splitmix(part.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for a sub-task identified by `parts` under `seed`.
    pub fn derive(seed: u64, parts: &[u64]) -> Self {
        Self::new(mix_seed(seed, parts))
    }

    /// Uniform integer in `[lo, hi)`. Panics when the range is empty.
    pub fn below(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo < hi, "empty range {lo}..{hi}");
        self.inner.gen_range(lo as u64..hi as u64) as usize
    }

    /// Uniform choice from a slice; `None` when it is empty.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.below(0, items.len())])
        }
    }

    /// Uniform real in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(0, i + 1);
            items.swap(i, j);
        }
    }
}
