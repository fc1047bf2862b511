use serde::Serialize;

use crate::crypto::{
    bit_byte, ecdh_keygen, ecdh_shared, f1, f2_link_key, f3, hash_invocations, Commitment128,
    CurveId, DhKey, Digest256, KeyPair, LinkKey, Nonce128, PublicKey, Rng,
};

use super::derive::{
    enhanced_derive_rprime, mask_position, passkey_bit, rprime_bit, rprime_block, sm_derive_rstar,
};
use super::{
    AbortReason, DeviceIdentity, Message, MessageKind, Passkey, ProtocolError, Role, Variant,
};

#[derive(Debug, Clone)]
pub struct PartyConfig {
    pub variant: Variant,
    pub curve: CurveId,
    pub local: DeviceIdentity,
    pub peer: DeviceIdentity,
    pub passkey: Passkey,
    /// When false the party never checks what the peer sends. Attackers
    /// impersonating a device run in this mode so they keep talking after a
    /// wrong guess.
    pub verify_peer: bool,
}

impl PartyConfig {
    pub fn honest(variant: Variant, curve: CurveId, role: Role, passkey: Passkey) -> Self {
        PartyConfig {
            variant,
            curve,
            local: DeviceIdentity::default_for(role),
            peer: DeviceIdentity::default_for(role.peer()),
            passkey,
            verify_peer: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    PublicKeyExchange,
    Authentication1,
    Authentication2,
    LinkKeyCalculation,
    Done,
    Aborted,
}

/// HMAC evaluations a party performed, split by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseHashes {
    pub phase1: u64,
    pub phase2: u64,
    pub phase3: u64,
    pub phase4: u64,
}

impl PhaseHashes {
    fn add(&mut self, phase: Phase, n: u64) {
        match phase {
            Phase::PublicKeyExchange => self.phase1 += n,
            Phase::Authentication1 => self.phase2 += n,
            Phase::Authentication2 => self.phase3 += n,
            Phase::LinkKeyCalculation | Phase::Done | Phase::Aborted => self.phase4 += n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Continue,
    Phase2Done,
    SessionDone,
    Abort(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub outgoing: Vec<Message>,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Start,
    Kind(MessageKind),
    Nothing,
}

/// One device's view of a pairing session.
#[derive(Debug, Clone)]
pub struct Party {
    config: PartyConfig,
    keypair: KeyPair,
    peer_public: Option<PublicKey>,
    dhkey: Option<DhKey>,
    phase: Phase,
    aborted_in: Option<Phase>,
    expect: Expect,
    round: u8,

    // SM
    own_seed_nonce: Option<Nonce128>,
    peer_seed_nonce: Option<Nonce128>,
    rstar: Option<u32>,

    // Enhanced
    rprime: Option<Digest256>,
    own_position: Option<u8>,
    masked_blocks: Vec<u8>,
    drawn_positions: Vec<u8>,
    disclosures: Vec<(u8, bool)>,

    // current round
    own_bit: Option<bool>,
    own_nonce: Option<Nonce128>,
    peer_commit: Option<Commitment128>,
    final_nonces: Option<(Nonce128, Nonce128)>,

    link_key: Option<LinkKey>,
    abort: Option<AbortReason>,
    hashes: PhaseHashes,
    mark: u64,
}

type Outcome = Result<(Vec<Message>, Event), AbortReason>;

fn violation(detail: impl Into<String>) -> AbortReason {
    AbortReason::ProtocolViolation {
        detail: detail.into(),
    }
}

impl Party {
    pub fn new(config: PartyConfig, rng: &mut Rng) -> Self {
        let keypair = ecdh_keygen(rng, config.curve);
        Self::with_keypair(config, keypair)
    }

    pub fn with_keypair(config: PartyConfig, keypair: KeyPair) -> Self {
        let expect = match config.local.role {
            Role::A => Expect::Start,
            Role::B => Expect::Kind(MessageKind::PublicKey),
        };
        Party {
            config,
            keypair,
            peer_public: None,
            dhkey: None,
            phase: Phase::PublicKeyExchange,
            aborted_in: None,
            expect,
            round: 0,
            own_seed_nonce: None,
            peer_seed_nonce: None,
            rstar: None,
            rprime: None,
            own_position: None,
            masked_blocks: Vec::new(),
            drawn_positions: Vec::new(),
            disclosures: Vec::new(),
            own_bit: None,
            own_nonce: None,
            peer_commit: None,
            final_nonces: None,
            link_key: None,
            abort: None,
            hashes: PhaseHashes::default(),
            mark: 0,
        }
    }

    pub fn role(&self) -> Role {
        self.config.local.role
    }

    pub fn config(&self) -> &PartyConfig {
        &self.config
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn peer_public(&self) -> Option<&PublicKey> {
        self.peer_public.as_ref()
    }

    pub fn dhkey(&self) -> Option<&DhKey> {
        self.dhkey.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Phase the party was in when it aborted.
    pub fn aborted_in(&self) -> Option<Phase> {
        self.aborted_in
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        self.abort.as_ref()
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.phase, Phase::Done | Phase::Aborted)
    }

    pub fn link_key(&self) -> Option<LinkKey> {
        self.link_key
    }

    /// SM authentication value, once derived.
    pub fn rstar(&self) -> Option<u32> {
        self.rstar
    }

    /// Seed nonces as `(N_a0, N_b0)`.
    pub fn seed_nonces(&self) -> Option<(Nonce128, Nonce128)> {
        let (own, peer) = (self.own_seed_nonce?, self.peer_seed_nonce?);
        Some(match self.role() {
            Role::A => (own, peer),
            Role::B => (peer, own),
        })
    }

    pub fn rprime(&self) -> Option<&Digest256> {
        self.rprime.as_ref()
    }

    /// Block indexes of r' that masked this party's own positions, in order.
    pub fn masked_blocks(&self) -> &[u8] {
        &self.masked_blocks
    }

    /// Positions this party drew, one per round, before masking.
    pub fn drawn_positions(&self) -> &[u8] {
        &self.drawn_positions
    }

    /// `(position, bit)` pairs of r' this party committed to.
    pub fn disclosures(&self) -> &[(u8, bool)] {
        &self.disclosures
    }

    pub fn hashes(&self) -> PhaseHashes {
        self.hashes
    }

    /// Secret state held for the pairing: DHKey and the 20-bit passkey, plus r' when derived.
    pub fn storage_bits(&self) -> u64 {
        let dh = self.dhkey.as_ref().map_or(0, DhKey::bits);
        let rp = if self.rprime.is_some() { 256 } else { 0 };
        dh + 20 + rp
    }

    /// Advances by one protocol step. `None` kicks off the initiator.
    pub fn step(
        &mut self,
        incoming: Option<&Message>,
        rng: &mut Rng,
    ) -> Result<Step, ProtocolError> {
        if self.is_terminal() {
            return Err(ProtocolError::Terminal);
        }
        self.mark = hash_invocations();
        let outcome = match incoming {
            None if self.expect == Expect::Start => self.start(),
            None => Ok((Vec::new(), Event::Continue)),
            Some(msg) => self.receive(msg, rng),
        };
        self.charge();
        Ok(match outcome {
            Ok((outgoing, event)) => Step { outgoing, event },
            Err(reason) => {
                self.aborted_in = Some(self.phase);
                self.phase = Phase::Aborted;
                self.expect = Expect::Nothing;
                self.abort = Some(reason.clone());
                Step {
                    outgoing: Vec::new(),
                    event: Event::Abort(reason),
                }
            }
        })
    }

    fn charge(&mut self) {
        let now = hash_invocations();
        self.hashes.add(self.phase, now - self.mark);
        self.mark = now;
    }

    fn enter(&mut self, phase: Phase) {
        self.charge();
        self.phase = phase;
    }

    fn msg(&self, kind: MessageKind, round: Option<u8>, payload: Vec<u8>) -> Message {
        Message {
            sender: self.role(),
            kind,
            round,
            payload,
        }
    }

    fn start(&mut self) -> Outcome {
        self.expect = Expect::Kind(MessageKind::PublicKey);
        let pk = self.msg(
            MessageKind::PublicKey,
            None,
            self.keypair.public().to_wire(),
        );
        Ok((vec![pk], Event::Continue))
    }

    fn receive(&mut self, msg: &Message, rng: &mut Rng) -> Outcome {
        let Expect::Kind(expected) = self.expect else {
            return Err(violation(format!("unexpected {:?} before start", msg.kind)));
        };
        if msg.sender != self.role().peer() {
            return Err(violation(format!("message from own role {}", msg.sender)));
        }
        if msg.kind != expected {
            return Err(violation(format!(
                "expected {expected:?}, got {:?}",
                msg.kind
            )));
        }
        let round_bound = matches!(
            msg.kind,
            MessageKind::MaskedPosition | MessageKind::Commit | MessageKind::NonceReveal
        );
        let want_round = round_bound.then_some(self.round);
        if msg.round != want_round {
            return Err(violation(format!(
                "round {:?}, expected {want_round:?}",
                msg.round
            )));
        }
        if msg.payload.len() != msg.kind.payload_len(self.config.curve) {
            return Err(violation(format!(
                "{:?} payload of {} bytes",
                msg.kind,
                msg.payload.len()
            )));
        }
        match msg.kind {
            MessageKind::PublicKey => self.on_public_key(&msg.payload, rng),
            MessageKind::SeedNonce => self.on_seed_nonce(&msg.payload, rng),
            MessageKind::MaskedPosition => self.on_masked_position(msg.payload[0], rng),
            MessageKind::Commit => self.on_commit(&msg.payload, rng),
            MessageKind::NonceReveal => self.on_nonce_reveal(&msg.payload, rng),
            MessageKind::Phase3Check => self.on_phase3_check(&msg.payload),
        }
    }

    fn dh(&self) -> &DhKey {
        self.dhkey.as_ref().expect("DHKey set in phase 1")
    }

    fn own_x(&self) -> [u8; 32] {
        self.keypair.public().x_padded()
    }

    fn peer_x(&self) -> [u8; 32] {
        self.peer_public
            .as_ref()
            .expect("peer key set in phase 1")
            .x_padded()
    }

    fn on_public_key(&mut self, payload: &[u8], rng: &mut Rng) -> Outcome {
        let peer = PublicKey::from_wire(self.config.curve, payload)
            .map_err(|_| AbortReason::InvalidPublicKey)?;
        let dhkey = ecdh_shared(&self.keypair, &peer).map_err(|_| AbortReason::InvalidPublicKey)?;
        self.peer_public = Some(peer);
        self.dhkey = Some(dhkey);

        let mut out = Vec::new();
        if self.role() == Role::B {
            out.push(self.msg(
                MessageKind::PublicKey,
                None,
                self.keypair.public().to_wire(),
            ));
        }
        self.enter(Phase::Authentication1);

        match self.config.variant {
            Variant::Original => {
                self.round = 1;
                if self.role() == Role::A {
                    self.own_bit = Some(self.secret_bit()?);
                    out.push(self.commit(rng));
                }
                self.expect = Expect::Kind(MessageKind::Commit);
            }
            Variant::Sm => {
                if self.role() == Role::A {
                    let n = rng.nonce128();
                    self.own_seed_nonce = Some(n);
                    out.push(self.msg(MessageKind::SeedNonce, None, n.0.to_vec()));
                }
                self.expect = Expect::Kind(MessageKind::SeedNonce);
            }
            Variant::Enhanced => {
                self.rprime = Some(enhanced_derive_rprime(self.dh(), self.config.passkey));
                self.round = 1;
                if self.role() == Role::A {
                    out.push(self.masked_position(rng)?);
                }
                self.expect = Expect::Kind(MessageKind::MaskedPosition);
            }
        }
        Ok((out, Event::Continue))
    }

    fn on_seed_nonce(&mut self, payload: &[u8], rng: &mut Rng) -> Outcome {
        self.peer_seed_nonce =
            Some(Nonce128::from_slice(payload).map_err(|_| violation("seed nonce"))?);
        let mut out = Vec::new();
        if self.role() == Role::B {
            let n = rng.nonce128();
            self.own_seed_nonce = Some(n);
            out.push(self.msg(MessageKind::SeedNonce, None, n.0.to_vec()));
        }
        let (n_a0, n_b0) = self.seed_nonces().expect("both seed nonces known");
        self.rstar = Some(sm_derive_rstar(
            self.dh(),
            &n_a0,
            &n_b0,
            self.config.passkey,
        ));
        self.round = 1;
        if self.role() == Role::A {
            self.own_bit = Some(self.secret_bit()?);
            out.push(self.commit(rng));
        }
        self.expect = Expect::Kind(MessageKind::Commit);
        Ok((out, Event::Continue))
    }

    fn on_masked_position(&mut self, masked: u8, rng: &mut Rng) -> Outcome {
        let round = self.round;
        let rp = *self
            .rprime
            .as_ref()
            .expect("r' derived on entering phase 2");
        let block = rprime_block(&rp, round).map_err(|e| violation(e.to_string()))?;
        let peer_position = mask_position(masked, block);
        let bit = if peer_position != 0 {
            let bit = rprime_bit(&rp, u16::from(peer_position)).expect("1..=255");
            self.disclosures.push((peer_position, bit));
            bit
        } else if self.config.verify_peer {
            return Err(AbortReason::InvalidPosition { round });
        } else {
            // A lenient party keeps going with an arbitrary bit.
            false
        };
        self.own_bit = Some(bit);

        let mut out = Vec::new();
        match self.role() {
            Role::A => out.push(self.commit(rng)),
            Role::B => out.push(self.masked_position(rng)?),
        }
        self.expect = Expect::Kind(MessageKind::Commit);
        Ok((out, Event::Continue))
    }

    fn on_commit(&mut self, payload: &[u8], rng: &mut Rng) -> Outcome {
        self.peer_commit =
            Some(Commitment128::from_slice(payload).map_err(|_| violation("commit"))?);
        let out = match self.role() {
            Role::A => {
                let n = self.own_nonce.expect("A committed first");
                vec![self.msg(MessageKind::NonceReveal, Some(self.round), n.0.to_vec())]
            }
            Role::B => {
                if self.config.variant != Variant::Enhanced {
                    self.own_bit = Some(self.secret_bit()?);
                }
                vec![self.commit(rng)]
            }
        };
        self.expect = Expect::Kind(MessageKind::NonceReveal);
        Ok((out, Event::Continue))
    }

    fn on_nonce_reveal(&mut self, payload: &[u8], rng: &mut Rng) -> Outcome {
        let round = self.round;
        let peer_nonce = Nonce128::from_slice(payload).map_err(|_| violation("nonce"))?;
        if self.config.verify_peer {
            let expected = self.expected_peer_bit()?;
            let recomputed = f1(
                &self.peer_x(),
                &self.own_x(),
                &peer_nonce,
                bit_byte(expected),
            );
            if Some(recomputed) != self.peer_commit {
                return Err(AbortReason::CommitMismatch { round });
            }
        }
        let own_nonce = self.own_nonce.expect("own nonce drawn at commit");
        self.final_nonces = Some(match self.role() {
            Role::A => (own_nonce, peer_nonce),
            Role::B => (peer_nonce, own_nonce),
        });

        let mut out = Vec::new();
        if self.role() == Role::B {
            out.push(self.msg(MessageKind::NonceReveal, Some(round), own_nonce.0.to_vec()));
        }

        if round == self.config.variant.rounds() {
            self.enter(Phase::Authentication2);
            if self.role() == Role::A {
                let e_a = self.check_value(Role::A);
                out.push(self.msg(MessageKind::Phase3Check, None, e_a.0.to_vec()));
            }
            self.expect = Expect::Kind(MessageKind::Phase3Check);
            return Ok((out, Event::Phase2Done));
        }

        self.round += 1;
        self.own_bit = None;
        self.own_nonce = None;
        self.peer_commit = None;
        let enhanced = self.config.variant == Variant::Enhanced;
        if self.role() == Role::A {
            if enhanced {
                out.push(self.masked_position(rng)?);
            } else {
                self.own_bit = Some(self.secret_bit()?);
                out.push(self.commit(rng));
            }
        }
        self.expect = Expect::Kind(if enhanced {
            MessageKind::MaskedPosition
        } else {
            MessageKind::Commit
        });
        Ok((out, Event::Continue))
    }

    fn on_phase3_check(&mut self, payload: &[u8]) -> Outcome {
        let received = Commitment128::from_slice(payload).map_err(|_| violation("check value"))?;
        let peer = self.role().peer();
        if self.config.verify_peer && received != self.check_value(peer) {
            return Err(AbortReason::Phase3Mismatch);
        }
        let mut out = Vec::new();
        if self.role() == Role::B {
            let e_b = self.check_value(Role::B);
            out.push(self.msg(MessageKind::Phase3Check, None, e_b.0.to_vec()));
        }
        self.enter(Phase::LinkKeyCalculation);
        let (n_a, n_b) = self.final_nonces.expect("phase 2 completed");
        let (a, b) = self.identities();
        self.link_key = Some(f2_link_key(self.dh(), &n_a, &n_b, &a.bd_addr, &b.bd_addr));
        self.enter(Phase::Done);
        self.expect = Expect::Nothing;
        Ok((out, Event::SessionDone))
    }

    fn identities(&self) -> (DeviceIdentity, DeviceIdentity) {
        match self.role() {
            Role::A => (self.config.local, self.config.peer),
            Role::B => (self.config.peer, self.config.local),
        }
    }

    /// E_a when `of` is A, E_b when `of` is B, always over this party's own passkey.
    fn check_value(&self, of: Role) -> Commitment128 {
        let (n_a, n_b) = self.final_nonces.expect("phase 2 completed");
        let (a, b) = self.identities();
        let r = self.config.passkey.to_be_bytes();
        match of {
            Role::A => f3(self.dh(), &n_a, &n_b, &r, &a.iocap, &a.bd_addr, &b.bd_addr),
            Role::B => f3(self.dh(), &n_b, &n_a, &r, &b.iocap, &b.bd_addr, &a.bd_addr),
        }
    }

    /// Bit of the passkey (Original) or r* (SM) disclosed in the current round.
    fn secret_bit(&self) -> Result<bool, AbortReason> {
        let value = match self.config.variant {
            Variant::Original => self.config.passkey.value(),
            Variant::Sm => self.rstar.expect("r* derived before round 1"),
            Variant::Enhanced => unreachable!("enhanced bits come from r'"),
        };
        passkey_bit(value, self.round).map_err(|e| violation(e.to_string()))
    }

    fn expected_peer_bit(&self) -> Result<bool, AbortReason> {
        match self.config.variant {
            Variant::Original | Variant::Sm => self.secret_bit(),
            Variant::Enhanced => {
                let rp = self.rprime.as_ref().expect("r' derived");
                let pos = self.own_position.expect("own position drawn this round");
                Ok(rprime_bit(rp, u16::from(pos)).expect("1..=255"))
            }
        }
    }

    fn commit(&mut self, rng: &mut Rng) -> Message {
        let bit = self.own_bit.expect("bit chosen before committing");
        let nonce = rng.nonce128();
        self.own_nonce = Some(nonce);
        let c = f1(&self.own_x(), &self.peer_x(), &nonce, bit_byte(bit));
        self.msg(MessageKind::Commit, Some(self.round), c.0.to_vec())
    }

    fn masked_position(&mut self, rng: &mut Rng) -> Result<Message, AbortReason> {
        let position = rng.u8_range(1, 255);
        let rp = self.rprime.as_ref().expect("r' derived");
        let block = rprime_block(rp, self.round).map_err(|e| violation(e.to_string()))?;
        self.own_position = Some(position);
        self.masked_blocks.push(self.round);
        self.drawn_positions.push(position);
        Ok(self.msg(
            MessageKind::MaskedPosition,
            Some(self.round),
            vec![mask_position(position, block)],
        ))
    }
}
