//! Seeded random streams.
//!
//! All randomness flows through [`SeededRng`], a ChaCha8 stream keyed by a 64-bit seed. ChaCha8
//! output is fixed by its specification and portable across platforms, so identical seeds yield
//! identical samples everywhere. Independent sub-streams come from [`SeededRng::derive`] /
//! [`mix_seed`], a SplitMix64 finalizer over `(seed, stream)`.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::nn::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh generator for sub-stream `stream`; does not advance `self`.
    pub fn derive(&self, stream: u64) -> Self {
        Self::new(mix_seed(self.seed, stream))
    }

    /// Standard-normal draws, filled row-major.
    pub fn sample_normal<S: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<S> {
        let data = (0..rows * cols)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut self.inner);
                S::of(x)
            })
            .collect();
        Matrix::from_vec(rows, cols, data).expect("length matches shape")
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        if low == high {
            return low;
        }
        Uniform::new(low, high)
            .expect("finite bounds with low < high")
            .sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `amount` distinct indices from `0..len` in random order.
    pub fn sample_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, len, amount.min(len)).into_vec()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }
}

/// SplitMix64 finalizer applied to `seed + stream · golden-ratio`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Matrix<f64> = SeededRng::new(11).sample_normal(4, 6);
        let b: Matrix<f64> = SeededRng::new(11).sample_normal(4, 6);
        assert_eq!(a, b);
        let c: Matrix<f64> = SeededRng::new(12).sample_normal(4, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn shape_contract() {
        let m: Matrix<f32> = SeededRng::new(0).sample_normal(3, 5);
        assert_eq!(m.shape(), (3, 5));
        assert_eq!(m.as_slice().len(), 15);
        assert!(m.all_finite());
    }

    #[test]
    fn moments_of_standard_normal() {
        let m: Matrix<f64> = SeededRng::new(2024).sample_normal(1, 100_000);
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn derived_streams_differ() {
        let root = SeededRng::new(5);
        assert_ne!(root.derive(0).seed(), root.derive(1).seed());
        assert_eq!(root.derive(3).seed(), SeededRng::new(5).derive(3).seed());
    }
}
