use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Nonce128;

/// Seeded ChaCha20 stream. Every "random" protocol value comes from one of these.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Stream for trial `index` of an experiment seeded with `seed`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        Rng::from_seed(seed ^ index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fill(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn nonce128(&mut self) -> Nonce128 {
        let mut n = [0u8; 16];
        self.fill(&mut n);
        Nonce128(n)
    }

    /// Uniform in `lo..=hi`.
    pub fn u8_range(&mut self, lo: u8, hi: u8) -> u8 {
        self.inner.gen_range(lo..=hi)
    }

    /// Uniform in `0..bound`.
    pub fn below(&mut self, bound: u32) -> u32 {
        self.inner.gen_range(0..bound)
    }

    pub fn bit(&mut self) -> bool {
        self.inner.gen()
    }

    /// Uniform six-digit passkey value in `0..=999_999`.
    pub fn passkey(&mut self) -> u32 {
        self.below(1_000_000)
    }
}
