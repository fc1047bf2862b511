use serde::Serialize;

use crate::crypto::{ecdh_keygen, ecdh_shared, CurveId, KeyPair, LinkKey, PublicKey, Rng};
use crate::protocol::{
    DeviceIdentity, Interceptor, Message, MessageKind, Party, PartyConfig, Passkey, Phase, Role,
    Session, SessionStatus, Transcript, Variant,
};

use super::{recover_committed_bits, AdversaryError, CandidateSet, CapturedSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MitmMode {
    /// Swap public keys in phase 1, forward everything after verbatim.
    RelayPhase1Only,
    /// Terminate both links and speak to each device as its peer.
    FullImpersonation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuessSource {
    Fixed(Passkey),
    /// A uniformly drawn member of the set.
    FromCandidates(CandidateSet),
    /// The true passkey. Upper bound for experiments only.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MitmStrategy {
    pub mode: MitmMode,
    pub guess: Option<GuessSource>,
}

#[derive(Debug, Clone)]
pub struct MitmRun {
    /// The link between device A and the attacker.
    pub capture_a: CapturedSession,
    /// The link between the attacker and device B.
    pub capture_b: CapturedSession,
    pub guess: Option<Passkey>,
    /// The attacker holds a link key with at least one device.
    pub success: bool,
    pub link_key_with_a: Option<LinkKey>,
    pub link_key_with_b: Option<LinkKey>,
    /// Bits device A committed to and later opened.
    pub bits_learned_a: Vec<(u8, bool)>,
}

impl MitmRun {
    /// Rounds in which `device` checked the attacker, and how many it accepted.
    pub fn rounds_survived(&self, device: Role) -> (u8, u8) {
        let capture = match device {
            Role::A => &self.capture_a,
            Role::B => &self.capture_b,
        };
        let checked = capture
            .transcript
            .count(device.peer(), MessageKind::NonceReveal)
            .min(usize::from(capture.variant.rounds())) as u8;
        let failed = match &capture.status {
            SessionStatus::AbortPhase2 { side, .. } if *side == device => 1,
            _ => 0,
        };
        (checked, checked.saturating_sub(failed))
    }
}

fn resolve_guess(
    source: &GuessSource,
    truth: Passkey,
    rng: &mut Rng,
) -> Result<Passkey, AdversaryError> {
    match source {
        GuessSource::Fixed(p) => Ok(*p),
        GuessSource::Oracle => Ok(truth),
        GuessSource::FromCandidates(set) => {
            if set.is_empty() {
                return Err(AdversaryError::NoCandidates);
            }
            let pick = set.as_slice()[rng.below(set.len() as u32) as usize];
            Passkey::new(pick).map_err(|_| AdversaryError::NoCandidates)
        }
    }
}

/// One link in which the attacker poses as `device`'s peer using `guess`.
///
/// The attacker's party never checks what the device sends, so the session
/// runs until the device finishes or aborts.
pub fn impersonate(
    variant: Variant,
    curve: CurveId,
    device: Role,
    ids: (DeviceIdentity, DeviceIdentity),
    device_passkey: Passkey,
    guess: Passkey,
    rng: &mut Rng,
) -> (Session, CapturedSession) {
    let (id_a, id_b) = ids;
    let config = |local, peer, passkey, verify_peer| PartyConfig {
        variant,
        curve,
        local,
        peer,
        passkey,
        verify_peer,
    };
    let honest = device == Role::A;
    let a = Party::new(
        config(
            id_a,
            id_b,
            if honest { device_passkey } else { guess },
            honest,
        ),
        rng,
    );
    let b = Party::new(
        config(
            id_b,
            id_a,
            if honest { guess } else { device_passkey },
            !honest,
        ),
        rng,
    );
    let mut session = Session::new(a, b);
    let status = session.run(rng, &mut crate::protocol::Passthrough);
    let capture = CapturedSession {
        variant,
        curve,
        transcript: session.transcript().clone(),
        dhkey: session.party(device.peer()).dhkey().cloned(),
        status,
    };
    (session, capture)
}

struct KeySwap {
    toward_a: KeyPair,
    toward_b: KeyPair,
    link_a: Transcript,
    link_b: Transcript,
}

impl Interceptor for KeySwap {
    fn intercept(&mut self, message: Message) -> Message {
        let mut delivered = message.clone();
        if message.kind == MessageKind::PublicKey {
            let substitute = match message.sender {
                Role::A => &self.toward_b,
                Role::B => &self.toward_a,
            };
            delivered.payload = substitute.public().to_wire();
        }
        let (sent_on, delivered_on) = match message.sender {
            Role::A => (&mut self.link_a, &mut self.link_b),
            Role::B => (&mut self.link_b, &mut self.link_a),
        };
        sent_on.push(message);
        delivered_on.push(delivered.clone());
        delivered
    }
}

fn relay(
    variant: Variant,
    curve: CurveId,
    ids: (DeviceIdentity, DeviceIdentity),
    truth: Passkey,
    rng: &mut Rng,
) -> (CapturedSession, CapturedSession) {
    let (id_a, id_b) = ids;
    let config = |local, peer| PartyConfig {
        variant,
        curve,
        local,
        peer,
        passkey: truth,
        verify_peer: true,
    };
    let a = Party::new(config(id_a, id_b), rng);
    let b = Party::new(config(id_b, id_a), rng);
    let mut swap = KeySwap {
        toward_a: ecdh_keygen(rng, curve),
        toward_b: ecdh_keygen(rng, curve),
        link_a: Transcript::new(),
        link_b: Transcript::new(),
    };
    let mut session = Session::new(a, b);
    let status = session.run(rng, &mut swap);
    let dh = |kp: &KeyPair, side: Role| {
        let real = match side {
            Role::A => swap.link_a.find(Role::A, MessageKind::PublicKey, None)?,
            Role::B => swap.link_b.find(Role::B, MessageKind::PublicKey, None)?,
        };
        let pk = PublicKey::from_wire(curve, &real.payload).ok()?;
        ecdh_shared(kp, &pk).ok()
    };
    let dh_a = dh(&swap.toward_a, Role::A);
    let dh_b = dh(&swap.toward_b, Role::B);
    let capture = |transcript, dhkey| CapturedSession {
        variant,
        curve,
        transcript,
        dhkey,
        status: status.clone(),
    };
    (
        capture(swap.link_a.clone(), dh_a),
        capture(swap.link_b.clone(), dh_b),
    )
}

/// Runs one man-in-the-middle attempt between devices A and B sharing `truth`.
pub fn mitm_run(
    variant: Variant,
    curve: CurveId,
    strategy: &MitmStrategy,
    ids: (DeviceIdentity, DeviceIdentity),
    truth: Passkey,
    rng: &mut Rng,
) -> Result<MitmRun, AdversaryError> {
    let (capture_a, capture_b, guess, key_a, key_b) = match strategy.mode {
        MitmMode::RelayPhase1Only => {
            let (ca, cb) = relay(variant, curve, ids, truth, rng);
            (ca, cb, None, None, None)
        }
        MitmMode::FullImpersonation => {
            let source = strategy
                .guess
                .as_ref()
                .ok_or(AdversaryError::MissingGuess)?;
            let guess = resolve_guess(source, truth, rng)?;
            let (sa, ca) = impersonate(variant, curve, Role::A, ids, truth, guess, rng);
            let (sb, cb) = impersonate(variant, curve, Role::B, ids, truth, guess, rng);
            let key_a = (sa.a.phase() == Phase::Done)
                .then(|| sa.b.link_key())
                .flatten();
            let key_b = (sb.b.phase() == Phase::Done)
                .then(|| sb.a.link_key())
                .flatten();
            (ca, cb, Some(guess), key_a, key_b)
        }
    };
    let bits_learned_a = recover_committed_bits(&capture_a, Role::A)?;
    Ok(MitmRun {
        success: key_a.is_some() || key_b.is_some(),
        capture_a,
        capture_b,
        guess,
        link_key_with_a: key_a,
        link_key_with_b: key_b,
        bits_learned_a,
    })
}
