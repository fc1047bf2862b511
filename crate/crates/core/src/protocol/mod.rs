//! Message-level state machines for pairing phases 1–4.
//!
//! Phase 1 is an ECDH exchange, phase 2 is one of three passkey-entry
//! variants, phase 3 exchanges f3 check values over the full passkey and
//! phase 4 derives the link key.

mod derive;
mod party;
mod session;
mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use derive::{
    enhanced_derive_rprime, leading_six_digits, mask_position, passkey_bit, rprime_bit,
    rprime_block, sm_derive_rstar, SmSeed, ENHANCED_ROUNDS, PASSKEY_ROUNDS,
};
pub use party::{Event, Party, PartyConfig, Phase, PhaseHashes, Step};
pub use session::{run_session, Interceptor, Passthrough, Session, SessionOutcome, SessionStatus};
pub use transcript::{Transcript, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid passkey `{0}`: expected exactly six decimal digits")]
    InvalidPasskey(String),
    #[error("round {round} outside 1..={max}")]
    RoundOutOfRange { round: u8, max: u8 },
    #[error("bit position {0} outside 1..=255")]
    PositionOutOfRange(u16),
    #[error("party has already finished or aborted")]
    Terminal,
    #[error("malformed transcript line {line}: {reason}")]
    Transcript { line: usize, reason: String },
}

/// Six-digit passkey, held as an integer below 10^6 (20 significant bits).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Passkey(u32);

impl Passkey {
    pub const MAX: u32 = 999_999;

    pub fn new(value: u32) -> Result<Self, ProtocolError> {
        if value > Self::MAX {
            return Err(ProtocolError::InvalidPasskey(value.to_string()));
        }
        Ok(Passkey(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// 4-byte big-endian encoding used in every hash input.
    pub fn to_be_bytes(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for Passkey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06}", self.0)
    }
}

impl fmt::Debug for Passkey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Passkey({self})")
    }
}

impl FromStr for Passkey {
    type Err = ProtocolError;

    /// Requires exactly six ASCII digits, leading zeros included.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ProtocolError::InvalidPasskey(s.to_owned()));
        }
        Passkey::new(s.parse().expect("six digits fit in u32"))
    }
}

impl From<Passkey> for String {
    fn from(p: Passkey) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Passkey {
    type Error = ProtocolError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Initiator (A) or responder (B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::A => "A",
            Role::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeviceIdentity {
    pub role: Role,
    pub bd_addr: [u8; 6],
    pub iocap: [u8; 3],
}

impl DeviceIdentity {
    /// A: display + keyboard, B: keyboard only.
    pub fn default_for(role: Role) -> Self {
        match role {
            Role::A => DeviceIdentity {
                role,
                bd_addr: [0x00, 0x1a, 0x7d, 0xda, 0x71, 0x0a],
                iocap: [0x01, 0x00, 0x01],
            },
            Role::B => DeviceIdentity {
                role,
                bd_addr: [0x00, 0x1a, 0x7d, 0xda, 0x71, 0x0b],
                iocap: [0x00, 0x00, 0x01],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// The standard 20-round bitwise disclosure of the passkey.
    Original,
    /// Sun–Mu: 20 rounds over r* derived from fresh seed nonces.
    Sm,
    /// 10 rounds over bits of r' at masked random positions.
    Enhanced,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Sm, Variant::Enhanced];

    pub fn rounds(self) -> u8 {
        match self {
            Variant::Original | Variant::Sm => PASSKEY_ROUNDS,
            Variant::Enhanced => ENHANCED_ROUNDS,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Sm => "sm",
            Variant::Enhanced => "enhanced",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(Variant::Original),
            "sm" => Ok(Variant::Sm),
            "enhanced" => Ok(Variant::Enhanced),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    PublicKey,
    SeedNonce,
    MaskedPosition,
    Commit,
    NonceReveal,
    Phase3Check,
}

impl MessageKind {
    /// Fixed payload width in bytes.
    pub fn payload_len(self, curve: crate::crypto::CurveId) -> usize {
        match self {
            MessageKind::PublicKey => 2 * curve.width(),
            MessageKind::MaskedPosition => 1,
            MessageKind::SeedNonce
            | MessageKind::Commit
            | MessageKind::NonceReveal
            | MessageKind::Phase3Check => 16,
        }
    }

    /// Kinds whose payloads are phase-2 traffic.
    pub fn is_phase2(self) -> bool {
        matches!(
            self,
            MessageKind::SeedNonce
                | MessageKind::MaskedPosition
                | MessageKind::Commit
                | MessageKind::NonceReveal
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: Role,
    pub kind: MessageKind,
    pub round: Option<u8>,
    pub payload: Vec<u8>,
}

/// Why a party stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    /// The peer's revealed nonce does not open its commitment under the expected bit.
    CommitMismatch {
        round: u8,
    },
    /// The peer's f3 check value is wrong.
    Phase3Mismatch,
    /// The peer sent a key that is not a valid curve point.
    InvalidPublicKey,
    /// An unmasked peer position came out as 0, which no honest peer can pick.
    InvalidPosition {
        round: u8,
    },
    ProtocolViolation {
        detail: String,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passkey_parsing_requires_six_digits() {
        assert_eq!("000000".parse::<Passkey>().unwrap().value(), 0);
        assert_eq!("123456".parse::<Passkey>().unwrap().to_string(), "123456");
        assert_eq!(Passkey::new(42).unwrap().to_string(), "000042");
        for bad in ["12345", "1234567", "12a456", "-12345", " 12345"] {
            assert!(bad.parse::<Passkey>().is_err(), "{bad}");
        }
        assert!(Passkey::new(1_000_000).is_err());
        assert!(Passkey::new(Passkey::MAX).unwrap().value() < 1 << 20);
    }

    #[test]
    fn passkey_serializes_as_padded_string() {
        let p = Passkey::new(7).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"000007\"");
        assert_eq!(serde_json::from_str::<Passkey>("\"000007\"").unwrap(), p);
    }

    #[test]
    fn variant_round_counts() {
        assert_eq!(Variant::Original.rounds(), 20);
        assert_eq!(Variant::Sm.rounds(), 20);
        assert_eq!(Variant::Enhanced.rounds(), 10);
    }
}
