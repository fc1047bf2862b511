use serde::Serialize;

use crate::crypto::{DhKey, Nonce128};
use crate::protocol::SmSeed;

use super::CandidateSet;

/// The first `len` bits of an r* value in disclosure order: round `i` carries
/// bit `i - 1` of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DisclosedBits {
    pub value: u32,
    pub len: u8,
}

impl DisclosedBits {
    /// The first `len` disclosed bits of `rstar`.
    pub fn of(rstar: u32, len: u8) -> Self {
        DisclosedBits {
            value: rstar & Self::mask(len),
            len,
        }
    }

    fn mask(len: u8) -> u32 {
        if len >= 32 {
            u32::MAX
        } else {
            (1u32 << len) - 1
        }
    }

    pub fn matches(&self, rstar: u32) -> bool {
        rstar & Self::mask(self.len) == self.value
    }
}

/// Keeps the candidates whose r* under this session's DHKey and seed nonces
/// reproduces the observed bits. Candidates at or above `space_bound` are
/// dropped.
pub fn bruteforce_filter(
    dhkey: &DhKey,
    n_a0: &Nonce128,
    n_b0: &Nonce128,
    observed: DisclosedBits,
    candidates: &CandidateSet,
    space_bound: u32,
) -> CandidateSet {
    if observed.len == 0 {
        return candidates.filter(|&p| p < space_bound);
    }
    let seed = SmSeed::new(dhkey, n_a0, n_b0);
    candidates.filter(|&p| p < space_bound && observed.matches(seed.rstar(p)))
}
