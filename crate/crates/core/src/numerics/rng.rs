//! Reproducible random streams.
//!
//! A stream is identified by `(master_seed, stream_id)`. The generator is
//! ChaCha8 keyed by `master_seed` (expanded with the SplitMix64 procedure of
//! `rand_core::SeedableRng::seed_from_u64`) with its 64-bit stream counter
//! set to `stream_id`. Uniforms take the top 53 bits of each `u64` output.
//! Standard normals come in pairs from Box-Muller:
//!
//! ```text
//! u1 = ((x1 >> 11) + 1) * 2^-53        in (0, 1]
//! u2 =  (x2 >> 11)      * 2^-53        in [0, 1)
//! z1 = sqrt(-2 ln u1) cos(2 pi u2),  z2 = sqrt(-2 ln u1) sin(2 pi u2)
//! ```
//!
//! The transcendental functions come from `libm`, so sequences are
//! bit-identical across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// A sibling stream under the same master seed.
    pub const fn with_stream(self, stream_id: u64) -> Self {
        Self { master_seed: self.master_seed, stream_id }
    }

    pub fn sampler(&self) -> Sampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        Sampler { rng, spare: None }
    }
}

/// Sequential draws from one [`RngStream`].
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Sampler {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_MINUS_53;
        let u2 = (self.next_u64() >> 11) as f64 * TWO_POW_MINUS_53;
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.gaussian();
        }
    }

    /// `+1` or `-1` with equal probability, from the top bit of one draw.
    pub fn sign(&mut self) -> i8 {
        if self.next_u64() >> 63 == 1 {
            1
        } else {
            -1
        }
    }

    /// Index in `0..bound` by modulo reduction.
    pub fn index(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }
}

/// `count` i.i.d. standard normal draws from the start of `stream`.
pub fn gaussian_sample(stream: RngStream, count: usize) -> Vec<f64> {
    let mut sampler = stream.sampler();
    (0..count).map(|_| sampler.gaussian()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sample() {
        assert!(gaussian_sample(RngStream::new(1, 0), 0).is_empty());
    }

    #[test]
    fn same_stream_same_sequence() {
        let s = RngStream::new(42, 7);
        assert_eq!(gaussian_sample(s, 257), gaussian_sample(s, 257));
    }

    #[test]
    fn streams_are_distinct() {
        let a = gaussian_sample(RngStream::new(42, 0), 16);
        let b = gaussian_sample(RngStream::new(42, 1), 16);
        let c = gaussian_sample(RngStream::new(43, 0), 16);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_property() {
        let s = RngStream::new(9, 3);
        let long = gaussian_sample(s, 100);
        let short = gaussian_sample(s, 37);
        assert_eq!(&long[..37], &short[..]);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let draws = gaussian_sample(RngStream::new(2024, 0), 1_000_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.005, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "variance {var}");
    }

    #[test]
    fn uniform_range_and_signs() {
        let mut s = RngStream::new(5, 5).sampler();
        let mut pos = 0;
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
            if s.sign() == 1 {
                pos += 1;
            }
        }
        assert!((4_700..5_300).contains(&pos));
    }
}
