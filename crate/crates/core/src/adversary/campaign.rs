use serde::{Deserialize, Serialize};

use crate::crypto::{CurveId, Rng};
use crate::protocol::{
    enhanced_derive_rprime, rprime_bit, run_session, AbortReason, DeviceIdentity, MessageKind,
    Passkey, Phase, Role, SessionStatus, Variant,
};

use super::{
    bruteforce_filter, impersonate, recover_committed_bits, AdversaryError, CandidateSet,
    CapturedSession, DisclosedBits,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignParams {
    pub curve: CurveId,
    pub space_bound: u32,
    pub max_sessions: u32,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            curve: CurveId::P256,
            space_bound: 1_000_000,
            max_sessions: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CampaignResult {
    pub sessions_used: u32,
    pub recovered: Passkey,
    /// Surviving candidates after each session.
    pub candidate_history: Vec<usize>,
}

fn ids() -> (DeviceIdentity, DeviceIdentity) {
    (
        DeviceIdentity::default_for(Role::A),
        DeviceIdentity::default_for(Role::B),
    )
}

fn finish(
    candidates: &CandidateSet,
    sessions: u32,
    history: &[usize],
) -> Result<Option<CampaignResult>, AdversaryError> {
    if candidates.is_empty() {
        return Err(AdversaryError::NoCandidates);
    }
    Ok(candidates.single().map(|p| CampaignResult {
        sessions_used: sessions,
        recovered: Passkey::new(p).expect("candidates stay below the passkey bound"),
        candidate_history: history.to_vec(),
    }))
}

fn check_space(truth: Passkey, params: &CampaignParams) -> Result<(), AdversaryError> {
    if params.space_bound == 0
        || params.space_bound > Passkey::MAX + 1
        || truth.value() >= params.space_bound
    {
        return Err(AdversaryError::NoCandidates);
    }
    Ok(())
}

/// Repeated SM sessions against device A, each granting the attacker the first
/// `known_bits` disclosed bits of that session's r*.
///
/// Every session the attacker impersonates B, so it holds the DHKey and both
/// seed nonces, and drops candidates whose r* disagrees with the granted bits.
pub fn attack_campaign_sm(
    truth: Passkey,
    known_bits: u8,
    params: &CampaignParams,
    rng: &mut Rng,
) -> Result<CampaignResult, AdversaryError> {
    if !(1..=20).contains(&known_bits) {
        return Err(AdversaryError::KnownBitsOutOfRange(known_bits));
    }
    check_space(truth, params)?;
    let mut candidates = CandidateSet::full(params.space_bound);
    let mut history = Vec::new();
    for session_no in 1..=params.max_sessions {
        let guess = Passkey::new(candidates.as_slice()[0]).expect("in range");
        let (session, capture) =
            impersonate(Variant::Sm, params.curve, Role::A, ids(), truth, guess, rng);
        let rstar = session
            .a
            .rstar()
            .expect("device derives r* once seed nonces are exchanged");
        let (n_a0, n_b0) = session.a.seed_nonces().expect("seed nonces exchanged");
        let dhkey = capture.dhkey.as_ref().expect("attacker ran phase 1");
        let observed = DisclosedBits::of(rstar, known_bits);
        candidates = bruteforce_filter(
            dhkey,
            &n_a0,
            &n_b0,
            observed,
            &candidates,
            params.space_bound,
        );
        history.push(candidates.len());
        if let Some(result) = finish(&candidates, session_no, &history)? {
            return Ok(result);
        }
    }
    Err(AdversaryError::MaxSessionsExceeded {
        sessions: params.max_sessions,
        surviving: candidates.len(),
        candidate_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    /// Eavesdrop on honest pairings between the two devices.
    Passive,
    /// Impersonate each device's peer with a guessed passkey.
    #[default]
    Mitm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnhancedAttack {
    pub access: Access,
    /// Also use whether the device accepted the attacker's own commitments.
    pub use_abort_signal: bool,
}

#[derive(Debug, Default)]
struct RoundView {
    block: usize,
    device_mask: Option<u8>,
    attacker_mask: Option<u8>,
    /// Some(true) when the device decoded the attacker's mask and went on.
    mask_accepted: Option<bool>,
    device_bit: Option<bool>,
    /// Attacker's committed bit and whether the device accepted it.
    check: Option<(bool, bool)>,
}

fn aborted(
    status: &SessionStatus,
    device: Role,
    round: u8,
    what: fn(&AbortReason) -> bool,
) -> bool {
    matches!(status, SessionStatus::AbortPhase2 { round: r, side, reason } if *r == round && *side == device && what(reason))
}

/// Candidates consistent with one Enhanced capture of `device`'s link.
///
/// Without the DHKey nothing about r' can be tested and the input comes back
/// unchanged.
pub fn enhanced_filter(
    capture: &CapturedSession,
    device: Role,
    candidates: &CandidateSet,
    use_abort_signal: bool,
) -> Result<CandidateSet, AdversaryError> {
    let Some(dhkey) = capture.dhkey.as_ref() else {
        return Ok(candidates.clone());
    };
    let t = &capture.transcript;
    let attacker = device.peer();
    let device_bits = recover_committed_bits(capture, device)?;
    let attacker_bits = if use_abort_signal {
        recover_committed_bits(capture, attacker)?
    } else {
        Vec::new()
    };
    let bit_in =
        |bits: &[(u8, bool)], round| bits.iter().find(|(r, _)| *r == round).map(|&(_, b)| b);
    let mask = |side, round| {
        t.find(side, MessageKind::MaskedPosition, Some(round))
            .map(|m| m.payload[0])
    };

    let mut views = Vec::new();
    for round in 1..=capture.variant.rounds() {
        let attacker_mask = mask(attacker, round);
        let mask_accepted = if aborted(&capture.status, device, round, |r| {
            matches!(r, AbortReason::InvalidPosition { .. })
        }) {
            Some(false)
        } else if t.find(device, MessageKind::Commit, Some(round)).is_some() {
            Some(true)
        } else {
            None
        };
        let check = match bit_in(&attacker_bits, round) {
            Some(bit)
                if t.find(attacker, MessageKind::NonceReveal, Some(round))
                    .is_some() =>
            {
                let failed = aborted(&capture.status, device, round, |r| {
                    matches!(r, AbortReason::CommitMismatch { .. })
                });
                Some((bit, !failed))
            }
            _ => None,
        };
        let view = RoundView {
            block: usize::from(round) - 1,
            device_mask: mask(device, round),
            attacker_mask,
            mask_accepted: attacker_mask.and(mask_accepted),
            device_bit: bit_in(&device_bits, round),
            check,
        };
        views.push(view);
    }

    Ok(candidates.filter(|&p| {
        let Ok(passkey) = Passkey::new(p) else {
            return false;
        };
        let rp = enhanced_derive_rprime(dhkey, passkey);
        views.iter().all(|v| {
            let block = rp.0[v.block];
            if let Some(m) = v.device_mask {
                // the device never draws position 0
                if m ^ block == 0 {
                    return false;
                }
            }
            if let (Some(m), Some(accepted)) = (v.attacker_mask, v.mask_accepted) {
                let position = m ^ block;
                if (position != 0) != accepted {
                    return false;
                }
                if let Some(bit) = v.device_bit {
                    if position != 0
                        && rprime_bit(&rp, u16::from(position)).expect("1..=255") != bit
                    {
                        return false;
                    }
                }
            }
            if let (Some((attacker_bit, passed)), Some(m)) = (v.check, v.device_mask) {
                let expected =
                    rprime_bit(&rp, u16::from(m ^ block)).expect("nonzero, checked above");
                if (expected == attacker_bit) != passed {
                    return false;
                }
            }
            true
        })
    }))
}

/// Repeated Enhanced sessions against both devices, shrinking the candidate
/// set from every capture.
pub fn attack_campaign_enhanced(
    truth: Passkey,
    attack: EnhancedAttack,
    params: &CampaignParams,
    rng: &mut Rng,
) -> Result<CampaignResult, AdversaryError> {
    check_space(truth, params)?;
    let mut candidates = CandidateSet::full(params.space_bound);
    let mut history = Vec::new();
    for session_no in 1..=params.max_sessions {
        match attack.access {
            Access::Passive => {
                let (id_a, id_b) = ids();
                let out = run_session(
                    Variant::Enhanced,
                    params.curve,
                    truth,
                    truth,
                    id_a,
                    id_b,
                    rng,
                );
                let capture = CapturedSession {
                    variant: Variant::Enhanced,
                    curve: params.curve,
                    transcript: out.transcript,
                    dhkey: None,
                    status: out.status,
                };
                for device in [Role::A, Role::B] {
                    candidates =
                        enhanced_filter(&capture, device, &candidates, attack.use_abort_signal)?;
                }
            }
            Access::Mitm => {
                let pick = candidates.as_slice()[rng.below(candidates.len() as u32) as usize];
                let guess = Passkey::new(pick).expect("in range");
                for device in [Role::A, Role::B] {
                    let (session, capture) = impersonate(
                        Variant::Enhanced,
                        params.curve,
                        device,
                        ids(),
                        truth,
                        guess,
                        rng,
                    );
                    if session.party(device).phase() == Phase::Done {
                        candidates = candidates.filter(|&p| p == pick);
                        break;
                    }
                    candidates =
                        enhanced_filter(&capture, device, &candidates, attack.use_abort_signal)?
                            .filter(|&p| p != pick);
                }
            }
        }
        history.push(candidates.len());
        if let Some(result) = finish(&candidates, session_no, &history)? {
            return Ok(result);
        }
    }
    Err(AdversaryError::MaxSessionsExceeded {
        sessions: params.max_sessions,
        surviving: candidates.len(),
        candidate_history: history,
    })
}
