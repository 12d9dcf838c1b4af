//! Seeded randomness with snapshot-able state.
//!
//! Every stochastic choice in the crate flows through a [`SceneRng`] so that
//! scenes, datasets, and episodes are bit-reproducible from a `u64` seed and
//! the generator state can be captured inside scene snapshots.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixes a root seed with a salt into an independent derived seed.
///
/// SplitMix64 finalizer; used to give each scene / query / purpose its own
/// seed without consuming shared generator state.
pub fn mix64(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Captured generator state; 56 bytes, stored verbatim in scene snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

/// Deterministic generator owned by a scene (or a collection loop).
#[derive(Debug, Clone)]
pub struct SceneRng(ChaCha8Rng);

impl SceneRng {
    pub fn from_seed(seed: u64) -> Self {
        SceneRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Captures the full generator state.
    pub fn state(&self) -> RngState {
        RngState {
            seed: self.0.get_seed(),
            stream: self.0.get_stream(),
            word_pos: self.0.get_word_pos(),
        }
    }

    /// Rebuilds a generator that will continue exactly where `state` left off.
    pub fn restore(state: &RngState) -> Self {
        let mut rng = ChaCha8Rng::from_seed(state.seed);
        rng.set_stream(state.stream);
        rng.set_word_pos(state.word_pos);
        SceneRng(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform draw from `[0, n)`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection sampling keeps the draw exactly uniform.
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.0.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform draw from `[lo, hi]` (inclusive) for small integer ranges.
    pub fn range_u32(&mut self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi);
        lo + self.index((hi - lo + 1) as usize) as u32
    }

    /// Uniform f64 in `[0, 1)`, 53-bit resolution.
    pub fn unit_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit_f64()
    }

    /// Fisher-Yates shuffle with this generator.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        let n = slice.len();
        if n < 2 {
            return;
        }
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            slice.swap(i, j);
        }
    }
}
