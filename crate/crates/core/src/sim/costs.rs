use serde::Serialize;

use crate::crypto::{CurveId, Rng};
use crate::protocol::{MessageKind, Passkey, Session, Variant};

use super::SimError;

/// Per-pairing cost. Headline figures cover phase 2 only; the two extended
/// columns report what phases 1 and 3 add on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub variant: Variant,
    pub curve: CurveId,
    /// Phase-2 payload bits sent by both devices together.
    pub bits_exchanged: u64,
    /// Phase-2 hash evaluations by both devices together.
    pub hash_invocations: u64,
    /// Secrets one device keeps: DHKey, passkey and, for Enhanced, r'.
    pub storage_bits: u64,
    pub phase1_bits: u64,
    pub phase3_bits: u64,
}

/// Costs from the message layout alone.
pub fn analytic_costs(variant: Variant, curve: CurveId) -> CostReport {
    const NONCE: u64 = 128;
    const COMMIT: u64 = 128;
    let rounds = u64::from(variant.rounds());
    let per_round = COMMIT + NONCE + if variant == Variant::Enhanced { 8 } else { 0 };
    // One seed nonce each for SM.
    let preamble = if variant == Variant::Sm { 2 * NONCE } else { 0 };
    // Each device commits once and verifies once per round.
    let round_hashes = 2 * 2 * rounds;
    // r* or r' is derived once per device.
    let derive_hashes = if variant == Variant::Original { 0 } else { 2 };
    let storage = curve.bits() + 20 + if variant == Variant::Enhanced { 256 } else { 0 };
    CostReport {
        variant,
        curve,
        bits_exchanged: 2 * rounds * per_round + preamble,
        hash_invocations: round_hashes + derive_hashes,
        storage_bits: storage,
        phase1_bits: 2 * 2 * curve.bits(),
        phase3_bits: 2 * 128,
    }
}

/// Costs counted on a live honest session.
pub fn measured_costs(
    variant: Variant,
    curve: CurveId,
    rng: &mut Rng,
) -> Result<CostReport, SimError> {
    let passkey = Passkey::new(rng.passkey()).expect("in range");
    let mut session = Session::honest(variant, curve, passkey, passkey, rng);
    let status = session.run(rng, &mut crate::protocol::Passthrough);
    if !status.is_success() {
        return Err(SimError::MeasurementFailed(format!(
            "{variant} honest session: {status:?}"
        )));
    }
    let t = session.transcript();
    Ok(CostReport {
        variant,
        curve,
        bits_exchanged: t.phase2_bits(),
        hash_invocations: session.a.hashes().phase2 + session.b.hashes().phase2,
        storage_bits: session.a.storage_bits(),
        phase1_bits: t.bits_where(|m| m.kind == MessageKind::PublicKey),
        phase3_bits: t.bits_where(|m| m.kind == MessageKind::Phase3Check),
    })
}

/// Analytic costs, confirmed against an instrumented session.
pub fn account_costs(variant: Variant, curve: CurveId) -> Result<CostReport, SimError> {
    let analytic = analytic_costs(variant, curve);
    let measured = measured_costs(variant, curve, &mut Rng::from_seed(0))?;
    let fields = [
        (
            "bits_exchanged",
            analytic.bits_exchanged,
            measured.bits_exchanged,
        ),
        (
            "hash_invocations",
            analytic.hash_invocations,
            measured.hash_invocations,
        ),
        ("storage_bits", analytic.storage_bits, measured.storage_bits),
        ("phase1_bits", analytic.phase1_bits, measured.phase1_bits),
        ("phase3_bits", analytic.phase3_bits, measured.phase3_bits),
    ];
    for (field, a, m) in fields {
        if a != m {
            return Err(SimError::CostMismatch {
                variant,
                curve,
                field,
                analytic: a,
                measured: m,
            });
        }
    }
    Ok(analytic)
}
