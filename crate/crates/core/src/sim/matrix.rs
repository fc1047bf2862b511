use std::collections::BTreeMap;

use serde::Serialize;

use crate::adversary::{mitm_run, GuessSource, MitmMode, MitmStrategy};
use crate::crypto::{LinkKey, Rng};
use crate::protocol::{run_session, DeviceIdentity, Passkey, Role, SessionStatus, Variant};

use super::{ExperimentSpec, MatrixMode, PasskeyPolicy, SimError};

/// Where the sessions of one variant ended.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AbortDistribution {
    pub phase1: u32,
    /// Phase-2 aborts keyed by round.
    pub phase2: BTreeMap<u8, u32>,
    pub phase3: u32,
    pub stalled: u32,
}

impl AbortDistribution {
    fn record(&mut self, status: &SessionStatus) {
        match status {
            SessionStatus::Success => {}
            SessionStatus::AbortPhase1 { .. } => self.phase1 += 1,
            SessionStatus::AbortPhase2 { round, .. } => {
                *self.phase2.entry(*round).or_default() += 1
            }
            SessionStatus::AbortPhase3 { .. } => self.phase3 += 1,
            SessionStatus::Stalled => self.stalled += 1,
        }
    }

    /// `round:count` pairs joined by `;`.
    pub fn phase2_compact(&self) -> String {
        self.phase2
            .iter()
            .map(|(r, c)| format!("{r}:{c}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub variant: Variant,
    pub mode: MatrixMode,
    pub trials: u32,
    /// Honest: both devices finish. Attacks: the attacker holds a link key.
    pub successes: u32,
    pub success_rate: f64,
    /// Status of the link with device A.
    pub aborts: AbortDistribution,
    /// Fraction of trials with a completed link whose two ends hold equal keys.
    pub link_key_agreement: f64,
}

fn agree(a: Option<LinkKey>, b: Option<LinkKey>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y)
}

/// Batches of sessions per variant under one adversary mode.
pub fn run_matrix(spec: &ExperimentSpec) -> Result<Vec<MatrixRow>, SimError> {
    spec.validate()?;
    let ids = (
        DeviceIdentity::default_for(Role::A),
        DeviceIdentity::default_for(Role::B),
    );
    let reused = Passkey::new(Rng::from_seed(spec.seed).below(spec.space_bound)).expect("in range");
    let mut rows = Vec::new();
    for &variant in &spec.variants {
        let mut successes = 0;
        let mut agreements = 0;
        let mut aborts = AbortDistribution::default();
        for trial in 0..spec.trials {
            let mut rng = Rng::for_trial(spec.seed, u64::from(trial));
            let truth = match spec.passkey_policy {
                PasskeyPolicy::FreshEachSession => {
                    Passkey::new(rng.below(spec.space_bound)).expect("in range")
                }
                PasskeyPolicy::ReusedAcrossSessions => reused,
            };
            let (ok, agreed, status) = match spec.mode {
                MatrixMode::Honest => {
                    let out =
                        run_session(variant, spec.curve, truth, truth, ids.0, ids.1, &mut rng);
                    let ok = out.status.is_success();
                    (ok, agree(out.link_key_a, out.link_key_b), out.status)
                }
                mode => {
                    let strategy = match mode {
                        MatrixMode::MitmGuess => MitmStrategy {
                            mode: MitmMode::FullImpersonation,
                            guess: Some(GuessSource::Fixed(
                                Passkey::new(rng.below(spec.space_bound)).expect("in range"),
                            )),
                        },
                        MatrixMode::MitmOracle => MitmStrategy {
                            mode: MitmMode::FullImpersonation,
                            guess: Some(GuessSource::Oracle),
                        },
                        _ => MitmStrategy {
                            mode: MitmMode::RelayPhase1Only,
                            guess: None,
                        },
                    };
                    let run = mitm_run(variant, spec.curve, &strategy, ids, truth, &mut rng)?;
                    // An attacker's link key is checked against the device it fooled.
                    let agreed = run.link_key_with_a.is_some() || run.link_key_with_b.is_some();
                    (run.success, agreed, run.capture_a.status)
                }
            };
            successes += u32::from(ok);
            agreements += u32::from(agreed);
            aborts.record(&status);
        }
        let trials = f64::from(spec.trials);
        rows.push(MatrixRow {
            variant,
            mode: spec.mode,
            trials: spec.trials,
            successes,
            success_rate: f64::from(successes) / trials,
            aborts,
            link_key_agreement: f64::from(agreements) / trials,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_rows_all_succeed() {
        let spec = ExperimentSpec {
            trials: 20,
            passkey_policy: PasskeyPolicy::FreshEachSession,
            ..ExperimentSpec::default()
        };
        for row in run_matrix(&spec).unwrap() {
            assert_eq!(row.success_rate, 1.0);
            assert_eq!(row.link_key_agreement, 1.0);
            assert_eq!(row.aborts, AbortDistribution::default());
        }
    }

    #[test]
    fn relay_never_succeeds() {
        let spec = ExperimentSpec {
            trials: 10,
            mode: MatrixMode::Relay,
            ..ExperimentSpec::default()
        };
        for row in run_matrix(&spec).unwrap() {
            assert_eq!(row.successes, 0);
            assert_eq!(row.aborts.phase2.values().sum::<u32>(), 10, "{row:?}");
        }
    }

    #[test]
    fn oracle_attacker_always_succeeds() {
        let spec = ExperimentSpec {
            trials: 5,
            mode: MatrixMode::MitmOracle,
            ..ExperimentSpec::default()
        };
        for row in run_matrix(&spec).unwrap() {
            assert_eq!(row.success_rate, 1.0);
        }
    }

    #[test]
    fn compact_rounds() {
        let mut d = AbortDistribution::default();
        d.phase2.insert(2, 3);
        d.phase2.insert(10, 1);
        assert_eq!(d.phase2_compact(), "2:3;10:1");
    }
}
