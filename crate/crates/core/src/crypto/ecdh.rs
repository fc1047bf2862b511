use std::fmt;

use p256::elliptic_curve::point::AffineCoordinates;
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::elliptic_curve::Group;

use super::{pad32, CryptoError, CurveId, DhKey, Rng};

type P192Secret = p192::elliptic_curve::SecretKey<p192::NistP192>;
type P192Public = p192::elliptic_curve::PublicKey<p192::NistP192>;

/// Uncompressed public key. The wire form is `x ‖ y`, each coordinate curve-width bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    curve: CurveId,
    x: Vec<u8>,
    y: Vec<u8>,
}

impl PublicKey {
    /// Parses and validates a wire-format key.
    pub fn from_wire(curve: CurveId, bytes: &[u8]) -> Result<Self, CryptoError> {
        let w = curve.width();
        if bytes.len() != 2 * w {
            return Err(CryptoError::InvalidLength {
                expected: 2 * w,
                actual: bytes.len(),
            });
        }
        let mut sec1 = Vec::with_capacity(1 + 2 * w);
        sec1.push(0x04);
        sec1.extend_from_slice(bytes);
        let on_curve = match curve {
            CurveId::P192 => P192Public::from_sec1_bytes(&sec1).is_ok(),
            CurveId::P256 => p256::PublicKey::from_sec1_bytes(&sec1).is_ok(),
        };
        if !on_curve {
            return Err(CryptoError::NotOnCurve(curve));
        }
        Ok(PublicKey {
            curve,
            x: bytes[..w].to_vec(),
            y: bytes[w..].to_vec(),
        })
    }

    pub fn curve(&self) -> CurveId {
        self.curve
    }

    pub fn x(&self) -> &[u8] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    /// x-coordinate left-padded to 32 bytes, the form f1 consumes.
    pub fn x_padded(&self) -> [u8; 32] {
        pad32(&self.x)
    }

    pub fn to_wire(&self) -> Vec<u8> {
        [&self.x[..], &self.y].concat()
    }

    fn sec1(&self) -> Vec<u8> {
        [&[0x04][..], &self.x, &self.y].concat()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}, x={})", self.curve, hex::encode(&self.x))
    }
}

#[derive(Clone)]
enum Secret {
    P192(P192Secret),
    P256(p256::SecretKey),
}

#[derive(Clone)]
pub struct KeyPair {
    secret: Secret,
    public: PublicKey,
}

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn curve(&self) -> CurveId {
        self.public.curve
    }

    /// Big-endian private scalar.
    pub fn scalar_bytes(&self) -> Vec<u8> {
        match &self.secret {
            Secret::P192(sk) => sk.to_bytes().to_vec(),
            Secret::P256(sk) => sk.to_bytes().to_vec(),
        }
    }

    /// Builds a key pair from a big-endian scalar in `1..n`.
    pub fn from_scalar(curve: CurveId, scalar: &[u8]) -> Result<Self, CryptoError> {
        let bad_len = || CryptoError::InvalidLength {
            expected: curve.width(),
            actual: scalar.len(),
        };
        if scalar.len() != curve.width() {
            return Err(bad_len());
        }
        let (secret, point) = match curve {
            CurveId::P192 => {
                let sk = P192Secret::from_slice(scalar).map_err(|_| bad_len())?;
                let point = sk.public_key().to_encoded_point(false);
                (Secret::P192(sk), point.as_bytes().to_vec())
            }
            CurveId::P256 => {
                let sk = p256::SecretKey::from_slice(scalar).map_err(|_| bad_len())?;
                let point = sk.public_key().to_encoded_point(false);
                (Secret::P256(sk), point.as_bytes().to_vec())
            }
        };
        let public = PublicKey::from_wire(curve, &point[1..])?;
        Ok(KeyPair { secret, public })
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

pub fn ecdh_keygen(rng: &mut Rng, curve: CurveId) -> KeyPair {
    let mut scalar = vec![0u8; curve.width()];
    loop {
        rng.fill(&mut scalar);
        // Rejects zero and values >= n; for both curves that is a vanishing fraction.
        if let Ok(kp) = KeyPair::from_scalar(curve, &scalar) {
            return kp;
        }
    }
}

/// x-coordinate of `own.secret · peer`.
pub fn ecdh_shared(own: &KeyPair, peer: &PublicKey) -> Result<DhKey, CryptoError> {
    if own.curve() != peer.curve {
        return Err(CryptoError::CurveMismatch {
            local: own.curve(),
            peer: peer.curve,
        });
    }
    let x = match &own.secret {
        Secret::P192(sk) => {
            let pk = P192Public::from_sec1_bytes(&peer.sec1())
                .map_err(|_| CryptoError::NotOnCurve(CurveId::P192))?;
            let shared = pk.to_projective() * *sk.to_nonzero_scalar();
            if bool::from(shared.is_identity()) {
                return Err(CryptoError::IdentityPoint);
            }
            shared.to_affine().x().to_vec()
        }
        Secret::P256(sk) => {
            let pk = p256::PublicKey::from_sec1_bytes(&peer.sec1())
                .map_err(|_| CryptoError::NotOnCurve(CurveId::P256))?;
            let shared = pk.to_projective() * *sk.to_nonzero_scalar();
            if bool::from(shared.is_identity()) {
                return Err(CryptoError::IdentityPoint);
            }
            shared.to_affine().x().to_vec()
        }
    };
    DhKey::new(own.curve(), x)
}
