use serde::Serialize;

use crate::adversary::{attack_campaign_sm, AdversaryError, CampaignParams};
use crate::crypto::Rng;
use crate::protocol::Passkey;

use super::{ExperimentSpec, PasskeyPolicy, SimError};

/// One row per known-bit count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Row {
    pub known_bits: u8,
    pub trials: u32,
    /// Campaigns that ended without a unique passkey. They count as
    /// `max_sessions` in the mean.
    pub exceeded: u32,
    pub mean_sessions: f64,
    pub stddev_sessions: f64,
    /// `1 + ceil(log2(space) / n)`.
    pub oracle_sessions: u32,
    /// Every completed campaign recovered the true passkey.
    pub all_correct: bool,
    /// Wrong candidates surviving the first session, summed over trials.
    pub first_session_survivors: u64,
    pub expected_survivors: f64,
    /// Distance from the binomial expectation, in standard deviations.
    pub survivor_z: f64,
}

pub fn oracle_sessions(space_bound: u32, known_bits: u8) -> u32 {
    1 + (f64::from(space_bound).log2() / f64::from(known_bits)).ceil() as u32
}

/// The session-count experiment: for each n, `trials` SM campaigns in which
/// the attacker learns n bits of r* per session.
pub fn run_fig4(spec: &ExperimentSpec) -> Result<Vec<Fig4Row>, SimError> {
    spec.validate()?;
    if spec.passkey_policy != PasskeyPolicy::ReusedAcrossSessions {
        return Err(SimError::InvalidSpec(
            "the session-count experiment needs passkey_policy = reused_across_sessions".into(),
        ));
    }
    let params = CampaignParams {
        curve: spec.curve,
        space_bound: spec.space_bound,
        max_sessions: spec.max_sessions,
    };
    let mut rows = Vec::with_capacity(spec.known_bits.len());
    for &n in &spec.known_bits {
        let mut sessions = Vec::with_capacity(spec.trials as usize);
        let mut exceeded = 0;
        let mut all_correct = true;
        let mut survivors = 0u64;
        for trial in 0..spec.trials {
            let mut rng = Rng::for_trial(spec.seed, u64::from(trial));
            let truth =
                Passkey::new(rng.below(spec.space_bound)).expect("space within passkey range");
            let history = match attack_campaign_sm(truth, n, &params, &mut rng) {
                Ok(result) => {
                    all_correct &= result.recovered == truth;
                    sessions.push(f64::from(result.sessions_used));
                    result.candidate_history
                }
                Err(AdversaryError::MaxSessionsExceeded {
                    candidate_history, ..
                }) => {
                    exceeded += 1;
                    sessions.push(f64::from(spec.max_sessions));
                    candidate_history
                }
                Err(e) => return Err(e.into()),
            };
            survivors += history.first().map_or(0, |&c| c as u64 - 1);
        }
        let mean = sessions.iter().sum::<f64>() / sessions.len() as f64;
        let var = sessions.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sessions.len() as f64;
        let p = 0.5f64.powi(i32::from(n));
        let draws = f64::from(spec.trials) * f64::from(spec.space_bound - 1);
        let expected = draws * p;
        let sigma = (draws * p * (1.0 - p)).sqrt();
        rows.push(Fig4Row {
            known_bits: n,
            trials: spec.trials,
            exceeded,
            mean_sessions: mean,
            stddev_sessions: var.sqrt(),
            oracle_sessions: oracle_sessions(spec.space_bound, n),
            all_correct,
            first_session_survivors: survivors,
            expected_survivors: expected,
            survivor_z: if sigma > 0.0 {
                (survivors as f64 - expected) / sigma
            } else {
                0.0
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_values() {
        let got: Vec<u32> = [4, 5, 6, 7]
            .iter()
            .map(|&n| oracle_sessions(1_000_000, n))
            .collect();
        assert_eq!(got, vec![6, 5, 5, 4]);
        assert_eq!(oracle_sessions(1_000_000, 20), 2);
    }

    #[test]
    fn small_run_is_deterministic_and_sane() {
        let spec = ExperimentSpec {
            trials: 10,
            space_bound: 5_000,
            seed: 3,
            ..ExperimentSpec::default()
        };
        let rows = run_fig4(&spec).unwrap();
        assert_eq!(rows, run_fig4(&spec).unwrap());
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.all_correct);
            assert_eq!(r.exceeded, 0);
            assert!(r.survivor_z.abs() < 3.0, "{r:?}");
        }
    }

    #[test]
    fn rejects_fresh_passkeys() {
        let spec = ExperimentSpec {
            passkey_policy: PasskeyPolicy::FreshEachSession,
            ..ExperimentSpec::default()
        };
        assert!(matches!(run_fig4(&spec), Err(SimError::InvalidSpec(_))));
    }
}
