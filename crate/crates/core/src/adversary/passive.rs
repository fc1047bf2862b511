use crate::crypto::{bit_byte, f1, Commitment128, Nonce128, PublicKey};
use crate::protocol::{MessageKind, Passkey, Role, Transcript};

use super::{AdversaryError, CapturedSession};

fn public_key(capture: &CapturedSession, side: Role) -> Result<PublicKey, AdversaryError> {
    let msg = capture
        .transcript
        .find(side, MessageKind::PublicKey, None)
        .ok_or(AdversaryError::TranscriptIncomplete {
            round: 0,
            what: "public key",
        })?;
    PublicKey::from_wire(capture.curve, &msg.payload).map_err(|_| {
        AdversaryError::TranscriptIncomplete {
            round: 0,
            what: "valid public key",
        }
    })
}

fn opened(t: &Transcript, side: Role, round: u8) -> Option<(Commitment128, Nonce128)> {
    let c = t.find(side, MessageKind::Commit, Some(round))?;
    let n = t.find(side, MessageKind::NonceReveal, Some(round))?;
    Some((
        Commitment128::from_slice(&c.payload).ok()?,
        Nonce128::from_slice(&n.payload).ok()?,
    ))
}

/// Bits `side` committed to in every round where it also revealed the nonce.
///
/// Needs only public keys, commitments and nonces from the transcript. At most
/// two f1 evaluations per round.
pub fn recover_committed_bits(
    capture: &CapturedSession,
    side: Role,
) -> Result<Vec<(u8, bool)>, AdversaryError> {
    let own = public_key(capture, side)?.x_padded();
    let peer = public_key(capture, side.peer())?.x_padded();
    let mut bits = Vec::new();
    for round in 1..=capture.variant.rounds() {
        let Some((commit, nonce)) = opened(&capture.transcript, side, round) else {
            continue;
        };
        let bit = [false, true]
            .into_iter()
            .find(|&b| f1(&own, &peer, &nonce, bit_byte(b)) == commit)
            .ok_or(AdversaryError::CommitmentUnexplained { round })?;
        bits.push((round, bit));
    }
    Ok(bits)
}

/// Rebuilds the initiator's 20-bit disclosed value from one complete capture.
///
/// On an Original capture this is the passkey. On an SM capture it is that
/// session's r*, which is not the passkey.
pub fn passive_recover_original(capture: &CapturedSession) -> Result<Passkey, AdversaryError> {
    if capture.variant.rounds() != 20 {
        return Err(AdversaryError::WrongVariant(capture.variant));
    }
    let bits = recover_committed_bits(capture, Role::A)?;
    let mut value = 0u32;
    for round in 1..=20u8 {
        let &(_, bit) =
            bits.iter()
                .find(|(r, _)| *r == round)
                .ok_or(AdversaryError::TranscriptIncomplete {
                    round,
                    what: "commitment and nonce",
                })?;
        value |= u32::from(bit) << (round - 1);
    }
    // Twenty bits can exceed 999999 only if the capture is not a passkey run.
    Passkey::new(value).map_err(|_| AdversaryError::CommitmentUnexplained { round: 20 })
}
