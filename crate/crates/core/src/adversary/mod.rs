//! Attacker capabilities: passive capture, man-in-the-middle impersonation,
//! bit recovery from commitments and candidate filtering across sessions.

mod bruteforce;
mod campaign;
mod mitm;
mod passive;

use serde::Serialize;

use crate::crypto::{CurveId, DhKey};
use crate::protocol::{SessionStatus, Transcript, Variant};

pub use bruteforce::{bruteforce_filter, DisclosedBits};
pub use campaign::{
    attack_campaign_enhanced, attack_campaign_sm, enhanced_filter, Access, CampaignParams,
    CampaignResult, EnhancedAttack,
};
pub use mitm::{impersonate, mitm_run, GuessSource, MitmMode, MitmRun, MitmStrategy};
pub use passive::{passive_recover_original, recover_committed_bits};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdversaryError {
    #[error("transcript has no {what} for round {round}")]
    TranscriptIncomplete { round: u8, what: &'static str },
    #[error("neither bit value opens the round-{round} commitment")]
    CommitmentUnexplained { round: u8 },
    #[error("operation needs a 20-round variant, capture is {0}")]
    WrongVariant(Variant),
    #[error("full impersonation needs a passkey guess source")]
    MissingGuess,
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("known bits per session must be in 1..=20, got {0}")]
    KnownBitsOutOfRange(u8),
    #[error("no unique passkey after {sessions} sessions ({surviving} candidates left)")]
    MaxSessionsExceeded {
        sessions: u32,
        surviving: usize,
        candidate_history: Vec<usize>,
    },
}

/// What an attacker holds after one session on one link.
#[derive(Debug, Clone)]
pub struct CapturedSession {
    pub variant: Variant,
    pub curve: CurveId,
    pub transcript: Transcript,
    /// Present only when the attacker ran phase 1 itself on this link.
    pub dhkey: Option<DhKey>,
    /// Observed end state of the link.
    pub status: SessionStatus,
}

/// Passkeys still consistent with everything observed, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    passkeys: Vec<u32>,
}

impl CandidateSet {
    /// Every passkey in `0..space_bound`.
    pub fn full(space_bound: u32) -> Self {
        CandidateSet {
            passkeys: (0..space_bound).collect(),
        }
    }

    pub fn from_sorted(passkeys: Vec<u32>) -> Self {
        debug_assert!(passkeys.windows(2).all(|w| w[0] < w[1]));
        CandidateSet { passkeys }
    }

    pub fn len(&self) -> usize {
        self.passkeys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passkeys.is_empty()
    }

    pub fn contains(&self, passkey: u32) -> bool {
        self.passkeys.binary_search(&passkey).is_ok()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.passkeys
    }

    /// The sole survivor, if exactly one remains.
    pub fn single(&self) -> Option<u32> {
        match self.passkeys.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn filter(&self, keep: impl FnMut(&u32) -> bool) -> Self {
        CandidateSet {
            passkeys: self.passkeys.iter().copied().filter(keep).collect(),
        }
    }
}
