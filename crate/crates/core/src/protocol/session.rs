use std::collections::VecDeque;

use serde::Serialize;

use crate::crypto::{CurveId, LinkKey, Rng};

use super::party::{Event, Party, PartyConfig, Phase};
use super::{AbortReason, DeviceIdentity, Message, Passkey, Role, Transcript, Variant};

/// Hook on the in-memory channel between the two parties.
pub trait Interceptor {
    /// Sees every message in flight and returns what the recipient receives.
    fn intercept(&mut self, message: Message) -> Message;
}

/// Delivers messages unchanged.
pub struct Passthrough;

impl Interceptor for Passthrough {
    fn intercept(&mut self, message: Message) -> Message {
        message
    }
}

impl<F: FnMut(Message) -> Message> Interceptor for F {
    fn intercept(&mut self, message: Message) -> Message {
        self(message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    Success,
    AbortPhase1 {
        side: Role,
        reason: AbortReason,
    },
    AbortPhase2 {
        round: u8,
        side: Role,
        reason: AbortReason,
    },
    AbortPhase3 {
        side: Role,
        reason: AbortReason,
    },
    /// The channel went quiet before both parties finished.
    Stalled,
}

impl SessionStatus {
    pub fn is_success(&self) -> bool {
        matches!(self, SessionStatus::Success)
    }

    /// Phase-2 round in which the session aborted, if it did.
    pub fn abort_round(&self) -> Option<u8> {
        match self {
            SessionStatus::AbortPhase2 { round, .. } => Some(*round),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub status: SessionStatus,
    pub link_key_a: Option<LinkKey>,
    pub link_key_b: Option<LinkKey>,
    pub transcript: Transcript,
}

/// Two parties joined by a synchronous in-memory channel.
#[derive(Debug, Clone)]
pub struct Session {
    pub a: Party,
    pub b: Party,
    transcript: Transcript,
}

impl Session {
    pub fn new(a: Party, b: Party) -> Self {
        assert_eq!(a.role(), Role::A, "first party must be the initiator");
        assert_eq!(b.role(), Role::B, "second party must be the responder");
        Session {
            a,
            b,
            transcript: Transcript::new(),
        }
    }

    /// Two honest devices with the default identities.
    pub fn honest(
        variant: Variant,
        curve: CurveId,
        passkey_a: Passkey,
        passkey_b: Passkey,
        rng: &mut Rng,
    ) -> Self {
        let a = Party::new(PartyConfig::honest(variant, curve, Role::A, passkey_a), rng);
        let b = Party::new(PartyConfig::honest(variant, curve, Role::B, passkey_b), rng);
        Session::new(a, b)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn party(&self, role: Role) -> &Party {
        match role {
            Role::A => &self.a,
            Role::B => &self.b,
        }
    }

    fn party_mut(&mut self, role: Role) -> &mut Party {
        match role {
            Role::A => &mut self.a,
            Role::B => &mut self.b,
        }
    }

    /// Drives both parties until one aborts or both finish.
    pub fn run(&mut self, rng: &mut Rng, hook: &mut dyn Interceptor) -> SessionStatus {
        let mut queue: VecDeque<Message> = VecDeque::new();
        for role in [Role::A, Role::B] {
            let step = self.party_mut(role).step(None, rng).expect("fresh party");
            queue.extend(step.outgoing);
        }
        while let Some(message) = queue.pop_front() {
            let message = hook.intercept(message);
            let target = message.sender.peer();
            self.transcript.push(message.clone());
            let Ok(step) = self.party_mut(target).step(Some(&message), rng) else {
                return SessionStatus::Stalled;
            };
            if let Event::Abort(reason) = step.event {
                return self.abort_status(target, reason);
            }
            queue.extend(step.outgoing);
        }
        if self.a.phase() == Phase::Done && self.b.phase() == Phase::Done {
            SessionStatus::Success
        } else {
            SessionStatus::Stalled
        }
    }

    fn abort_status(&self, side: Role, reason: AbortReason) -> SessionStatus {
        let party = self.party(side);
        match party.aborted_in() {
            Some(Phase::PublicKeyExchange) => SessionStatus::AbortPhase1 { side, reason },
            Some(Phase::Authentication1) => SessionStatus::AbortPhase2 {
                round: party.round(),
                side,
                reason,
            },
            _ => SessionStatus::AbortPhase3 { side, reason },
        }
    }

    pub fn outcome(&self, status: SessionStatus) -> SessionOutcome {
        SessionOutcome {
            status,
            link_key_a: self.a.link_key(),
            link_key_b: self.b.link_key(),
            transcript: self.transcript.clone(),
        }
    }
}

/// Runs one session over an untouched channel.
pub fn run_session(
    variant: Variant,
    curve: CurveId,
    passkey_a: Passkey,
    passkey_b: Passkey,
    id_a: DeviceIdentity,
    id_b: DeviceIdentity,
    rng: &mut Rng,
) -> SessionOutcome {
    let config = |local: DeviceIdentity, peer: DeviceIdentity, passkey| PartyConfig {
        variant,
        curve,
        local,
        peer,
        passkey,
        verify_peer: true,
    };
    let a = Party::new(config(id_a, id_b, passkey_a), rng);
    let b = Party::new(config(id_b, id_a, passkey_b), rng);
    let mut session = Session::new(a, b);
    let status = session.run(rng, &mut Passthrough);
    session.outcome(status)
}
