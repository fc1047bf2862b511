//! Byte-exact primitives behind every protocol variant.
//!
//! All keyed functions are HMAC-SHA256. Commitments, check values and link
//! keys keep the 16 most significant bytes of the MAC; seed derivations keep
//! all 32.

mod ecdh;
mod rng;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

pub use ecdh::{ecdh_keygen, ecdh_shared, KeyPair, PublicKey};
pub use rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("expected {expected} bytes, got {actual}")]
    InvalidLength { expected: usize, actual: usize },
    #[error("public key is not a point on {0}")]
    NotOnCurve(CurveId),
    #[error("shared secret is the point at infinity")]
    IdentityPoint,
    #[error("curve mismatch: local key on {local}, peer key on {peer}")]
    CurveMismatch { local: CurveId, peer: CurveId },
}

/// Curves supported for the phase-1 key agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveId {
    P192,
    #[default]
    P256,
}

impl CurveId {
    /// Coordinate width in bytes.
    pub const fn width(self) -> usize {
        match self {
            CurveId::P192 => 24,
            CurveId::P256 => 32,
        }
    }

    pub const fn bits(self) -> u64 {
        self.width() as u64 * 8
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveId::P192 => "p192",
            CurveId::P256 => "p256",
        })
    }
}

impl FromStr for CurveId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "p192" => Ok(CurveId::P192),
            "p256" => Ok(CurveId::P256),
            other => Err(format!("unknown curve `{other}` (expected p192 or p256)")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest256(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment128(pub [u8; 16]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce128(pub [u8; 16]);

/// Phase-4 link key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkKey(pub [u8; 16]);

macro_rules! hex_debug {
    ($($ty:ident),*) => {$(
        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($ty), hex::encode(self.0))
            }
        }

        impl AsRef<[u8]> for $ty {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }
    )*};
}

hex_debug!(Digest256, Commitment128, Nonce128, LinkKey);

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for LinkKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Commitment128 {
    /// Keeps the 16 most significant bytes of a digest.
    pub fn from_digest(digest: &Digest256) -> Self {
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest.0[..16]);
        Commitment128(out)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed(bytes).map(Commitment128)
    }
}

impl Nonce128 {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed(bytes).map(Nonce128)
    }
}

fn fixed<const N: usize>(bytes: &[u8]) -> Result<[u8; N], CryptoError> {
    bytes.try_into().map_err(|_| CryptoError::InvalidLength {
        expected: N,
        actual: bytes.len(),
    })
}

/// ECDH shared secret: the big-endian x-coordinate of the shared point.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DhKey {
    curve: CurveId,
    bytes: Vec<u8>,
}

impl DhKey {
    pub fn new(curve: CurveId, bytes: Vec<u8>) -> Result<Self, CryptoError> {
        if bytes.len() != curve.width() {
            return Err(CryptoError::InvalidLength {
                expected: curve.width(),
                actual: bytes.len(),
            });
        }
        Ok(DhKey { curve, bytes })
    }

    pub fn curve(&self) -> CurveId {
        self.curve
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bits(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }
}

impl fmt::Debug for DhKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DhKey({}, {})", self.curve, hex::encode(&self.bytes))
    }
}

thread_local! {
    static HASH_INVOCATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of HMAC-SHA256 evaluations performed on this thread so far.
///
/// Every f-function funnels through [`HmacKey::digest`], so differences of
/// this counter measure protocol hash cost without trusting the protocol code.
pub fn hash_invocations() -> u64 {
    HASH_INVOCATIONS.with(Cell::get)
}

/// An HMAC-SHA256 key with its pad states already absorbed.
///
/// Brute-force loops reuse one of these per DHKey so each candidate only pays
/// for the message blocks.
#[derive(Clone)]
pub struct HmacKey(Hmac<Sha256>);

impl HmacKey {
    pub fn new(key: &[u8]) -> Self {
        HmacKey(Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts keys of any length"))
    }

    /// MAC of the concatenation of `parts`.
    pub fn digest(&self, parts: &[&[u8]]) -> Digest256 {
        HASH_INVOCATIONS.with(|c| c.set(c.get() + 1));
        let mut mac = self.0.clone();
        for part in parts {
            mac.update(part);
        }
        Digest256(mac.finalize().into_bytes().into())
    }
}

pub fn hmac_sha256(key: &[u8], msg: &[u8]) -> Digest256 {
    HmacKey::new(key).digest(&[msg])
}

/// Wire encoding of a single committed bit.
pub const fn bit_byte(bit: bool) -> u8 {
    0x80 | bit as u8
}

/// Left-pads a big-endian coordinate to 32 bytes.
pub fn pad32(coordinate: &[u8]) -> [u8; 32] {
    assert!(coordinate.len() <= 32, "coordinate wider than 256 bits");
    let mut out = [0u8; 32];
    out[32 - coordinate.len()..].copy_from_slice(coordinate);
    out
}

/// Commitment function: key is the nonce, message is `U ‖ V ‖ Z`.
pub fn f1(u: &[u8; 32], v: &[u8; 32], x: &Nonce128, z: u8) -> Commitment128 {
    let digest = HmacKey::new(&x.0).digest(&[u, v, &[z]]);
    Commitment128::from_digest(&digest)
}

/// Phase-4 link key: `W` keys the MAC over `N1 ‖ N2 ‖ "btlk" ‖ A1 ‖ A2`.
pub fn f2_link_key(w: &DhKey, n1: &Nonce128, n2: &Nonce128, a1: &[u8; 6], a2: &[u8; 6]) -> LinkKey {
    let digest = HmacKey::new(w.as_bytes()).digest(&[&n1.0, &n2.0, b"btlk", a1, a2]);
    LinkKey(Commitment128::from_digest(&digest).0)
}

/// Untruncated seed derivation used for r* and r'.
pub fn f2_seed(w: &DhKey, parts: &[&[u8]]) -> Digest256 {
    HmacKey::new(w.as_bytes()).digest(parts)
}

/// Phase-3 check value over `N1 ‖ N2 ‖ R ‖ IOcap ‖ A1 ‖ A2`.
pub fn f3(
    w: &DhKey,
    n1: &Nonce128,
    n2: &Nonce128,
    r: &[u8; 4],
    iocap: &[u8; 3],
    a1: &[u8; 6],
    a2: &[u8; 6],
) -> Commitment128 {
    let digest = HmacKey::new(w.as_bytes()).digest(&[&n1.0, &n2.0, r, iocap, a1, a2]);
    Commitment128::from_digest(&digest)
}
