//! Deterministic, splittable random streams.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed by
//! the 64-bit seed through `SeedableRng::seed_from_u64`. Its output is
//! specified independently of platform and word size, so a seed reproduces the
//! same stream everywhere. Child streams reuse the key and select a distinct
//! ChaCha stream id, which keeps them independent of the parent.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from the same seed; `stream = 0` equals `new(seed)`.
    pub fn split(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        SeededRng {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw from `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        v.shuffle(&mut self.inner);
    }

    /// `amount` distinct indices from `0..n`, in ascending order.
    pub fn sample_indices(&mut self, n: usize, amount: usize) -> Vec<usize> {
        let mut s = index::sample(&mut self.inner, n, amount).into_vec();
        s.sort_unstable();
        s
    }

    pub fn uniform_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}
