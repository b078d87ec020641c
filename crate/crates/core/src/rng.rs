//! Seeded random streams.
//!
//! Every stochastic step in the toolkit draws from a [`SeedStream`], a ChaCha8
//! counter-mode generator. Sub-streams are derived by hashing the parent seed
//! together with a label, so a stream for "user 196" or "fold 3" depends only on
//! those inputs and not on how many other streams were created first.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Name and version of the generator; recorded in manifests.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.3";

/// Hashes `seed` and a sequence of labels into a 64-bit child seed.
pub fn derive_seed(seed: u64, labels: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for label in labels {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output has 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct SeedStream {
    inner: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Child stream keyed by `(seed, label)`.
    pub fn derived(seed: u64, label: &str) -> Self {
        Self::new(derive_seed(seed, &[label.as_bytes()]))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`, unbiased via rejection. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n) - 1;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// Uniform integer in the closed range `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let width = (hi - lo) as u64 + 1;
        if width == 0 {
            // full i64 range
            return self.next_u64() as i64;
        }
        lo + self.below(width) as i64
    }

    /// Uniform real in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Moves `count` uniformly chosen elements (without replacement) to the
    /// front of `xs`, in draw order.
    pub fn partial_shuffle<T>(&mut self, xs: &mut [T], count: usize) {
        let n = xs.len();
        for i in 0..count.min(n) {
            let j = i + self.below((n - i) as u64) as usize;
            xs.swap(i, j);
        }
    }
}
