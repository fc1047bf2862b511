//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use ssplab_core::adversary::{
    attack_campaign_enhanced, attack_campaign_sm, mitm_run, passive_recover_original, Access,
    AdversaryError, CampaignParams, CampaignResult, CapturedSession, EnhancedAttack, GuessSource,
    MitmMode, MitmStrategy,
};
use ssplab_core::crypto::{hash_invocations, CurveId, Rng};
use ssplab_core::protocol::{
    run_session, DeviceIdentity, MessageKind, Passkey, Passthrough, Role, Session, Variant,
};
use ssplab_core::sim::{
    account_costs, run_fig4, run_matrix, ExperimentSpec, MatrixMode, PasskeyPolicy,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("{what} took {elapsed:.2?}, budget {budget:?}")
    })
}

fn ids() -> (DeviceIdentity, DeviceIdentity) {
    (
        DeviceIdentity::default_for(Role::A),
        DeviceIdentity::default_for(Role::B),
    )
}

fn cost_exactness() -> Check {
    let start = Instant::now();
    let expected = [
        (Variant::Original, CurveId::P192, 10_240, 80, 212),
        (Variant::Original, CurveId::P256, 10_240, 80, 276),
        (Variant::Enhanced, CurveId::P192, 5_280, 42, 468),
        (Variant::Enhanced, CurveId::P256, 5_280, 42, 532),
    ];
    for (variant, curve, bits, hashes, storage) in expected {
        let c = account_costs(variant, curve).map_err(|e| e.to_string())?;
        ensure(
            (c.bits_exchanged, c.hash_invocations, c.storage_bits) == (bits, hashes, storage),
            || format!("{variant}/{curve}: got {c:?}"),
        )?;
    }
    within(start.elapsed(), Duration::from_secs(1), "cost accounting")?;
    Ok("Original 10240/80/212,276 and Enhanced 5280/42/468,532 match analytic and measured".into())
}

fn honest_completion() -> Check {
    let mut keys = Rng::from_seed(2);
    for variant in Variant::ALL {
        for trial in 0..1000u64 {
            let pk = Passkey::new(keys.passkey()).expect("in range");
            let mut rng = Rng::for_trial(2, trial);
            let (a, b) = ids();
            let out = run_session(variant, CurveId::P256, pk, pk, a, b, &mut rng);
            ensure(out.status.is_success(), || {
                format!("{variant} trial {trial}: {:?}", out.status)
            })?;
            ensure(
                out.link_key_a.is_some() && out.link_key_a == out.link_key_b,
                || format!("{variant} trial {trial}: link keys differ"),
            )?;
        }
    }
    Ok("3 x 1000 equal-passkey sessions succeeded with identical link keys".into())
}

fn passive_break() -> Check {
    let start = Instant::now();
    let mut rng = Rng::from_seed(3);
    let mut worst = 0;
    for i in 0..100 {
        let truth = Passkey::new(rng.passkey()).expect("in range");
        let (a, b) = ids();
        let out = run_session(
            Variant::Original,
            CurveId::P256,
            truth,
            truth,
            a,
            b,
            &mut rng,
        );
        let capture = CapturedSession {
            variant: Variant::Original,
            curve: CurveId::P256,
            transcript: out.transcript,
            dhkey: None,
            status: out.status,
        };
        let before = hash_invocations();
        let got = passive_recover_original(&capture).map_err(|e| format!("capture {i}: {e}"))?;
        let used = hash_invocations() - before;
        worst = worst.max(used);
        ensure(got == truth, || {
            format!("capture {i}: recovered {got}, expected {truth}")
        })?;
        ensure(used <= 40, || format!("capture {i}: {used} f1 evaluations"))?;
    }
    within(start.elapsed(), Duration::from_secs(1), "100 recoveries")?;
    Ok(format!(
        "100/100 passkeys recovered exactly, at most {worst} f1 evaluations per capture"
    ))
}

fn mitm_odds() -> Check {
    let start = Instant::now();
    let spec = ExperimentSpec {
        variants: vec![Variant::Original],
        trials: 10_000,
        seed: 4,
        passkey_policy: PasskeyPolicy::FreshEachSession,
        space_bound: 100,
        mode: MatrixMode::MitmGuess,
        ..ExperimentSpec::default()
    };
    let row = run_matrix(&spec).map_err(|e| e.to_string())?.remove(0);
    ensure((0.007..=0.013).contains(&row.success_rate), || {
        format!("success rate {} outside [0.007, 0.013]", row.success_rate)
    })?;

    let strategy = |guess| MitmStrategy {
        mode: MitmMode::FullImpersonation,
        guess: Some(GuessSource::Fixed(guess)),
    };
    let (mut checked, mut survived) = (0u32, 0u32);
    let mut trial = 0u64;
    while checked < 10_000 {
        let mut rng = Rng::for_trial(44, trial);
        trial += 1;
        let truth = Passkey::new(rng.passkey()).expect("in range");
        let guess = Passkey::new(rng.passkey()).expect("in range");
        let run = mitm_run(
            Variant::Original,
            CurveId::P256,
            &strategy(guess),
            ids(),
            truth,
            &mut rng,
        )
        .map_err(|e| e.to_string())?;
        let (c, s) = run.rounds_survived(Role::A);
        checked += u32::from(c);
        survived += u32::from(s);
    }
    let survival = f64::from(survived) / f64::from(checked);
    ensure((0.45..=0.55).contains(&survival), || {
        format!("per-round survival {survival:.4}")
    })?;
    within(start.elapsed(), Duration::from_secs(60), "MITM sampling")?;
    Ok(format!(
        "success rate {:.4} over 10^4 trials at space 100; per-round survival {survival:.4} over {checked} rounds",
        row.success_rate
    ))
}

fn fig4_shape() -> Check {
    let spec = ExperimentSpec {
        name: "fig4".into(),
        variants: vec![Variant::Sm],
        trials: 50,
        seed: 42,
        known_bits: vec![4, 5, 6, 7],
        space_bound: 1_000_000,
        ..ExperimentSpec::default()
    };
    let start = Instant::now();
    let rows = run_fig4(&spec).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(600), "full run")?;
    for pair in rows.windows(2) {
        ensure(pair[1].mean_sessions <= pair[0].mean_sessions, || {
            format!(
                "mean rises from n={} to n={}",
                pair[0].known_bits, pair[1].known_bits
            )
        })?;
    }
    for r in &rows {
        ensure(
            (r.mean_sessions - f64::from(r.oracle_sessions)).abs() <= 1.0,
            || {
                format!(
                    "n={}: mean {} vs oracle {}",
                    r.known_bits, r.mean_sessions, r.oracle_sessions
                )
            },
        )?;
        ensure(r.all_correct, || {
            format!("n={}: wrong passkey recovered", r.known_bits)
        })?;
        ensure(r.survivor_z.abs() <= 3.0, || {
            format!(
                "n={}: first-session shrinkage z = {:.2}",
                r.known_bits, r.survivor_z
            )
        })?;
    }

    let smoke = ExperimentSpec {
        space_bound: 10_000,
        ..spec
    };
    let start = Instant::now();
    run_fig4(&smoke).map_err(|e| e.to_string())?;
    let smoke_time = start.elapsed();
    within(smoke_time, Duration::from_secs(10), "10^4 smoke run")?;
    let means: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "n={}: {:.2} (oracle {})",
                r.known_bits, r.mean_sessions, r.oracle_sessions
            )
        })
        .collect();
    Ok(format!("{}; smoke run {smoke_time:.2?}", means.join(", ")))
}

fn sessions_or_cap(
    result: Result<CampaignResult, AdversaryError>,
    cap: u32,
) -> Result<u32, String> {
    match result {
        Ok(r) => Ok(r.sessions_used),
        Err(AdversaryError::MaxSessionsExceeded { .. }) => Ok(cap),
        Err(e) => Err(e.to_string()),
    }
}

fn sm_vs_enhanced() -> Check {
    let params = CampaignParams {
        space_bound: 10_000,
        max_sessions: 50,
        ..CampaignParams::default()
    };
    let (mut sm_total, mut enh_total) = (0u32, 0u32);
    for trial in 0..50u64 {
        let mut rng = Rng::for_trial(6, trial);
        let truth = Passkey::new(rng.below(params.space_bound)).expect("in range");
        sm_total += sessions_or_cap(attack_campaign_sm(truth, 7, &params, &mut rng), 50)?;

        let mut rng = Rng::for_trial(6, trial);
        let truth = Passkey::new(rng.below(params.space_bound)).expect("in range");
        let attack = EnhancedAttack::default();
        enh_total += sessions_or_cap(
            attack_campaign_enhanced(truth, attack, &params, &mut rng),
            50,
        )?;
    }
    let (sm_mean, enh_mean) = (f64::from(sm_total) / 50.0, f64::from(enh_total) / 50.0);
    ensure(enh_mean > sm_mean, || {
        format!("Enhanced mean {enh_mean} does not exceed SM mean {sm_mean}")
    })?;

    let passive = EnhancedAttack {
        access: Access::Passive,
        use_abort_signal: false,
    };
    let capped = CampaignParams {
        max_sessions: 10,
        ..params
    };
    let mut rng = Rng::from_seed(66);
    match attack_campaign_enhanced(
        Passkey::new(4_321).expect("in range"),
        passive,
        &capped,
        &mut rng,
    ) {
        Err(AdversaryError::MaxSessionsExceeded {
            candidate_history, ..
        }) => {
            ensure(candidate_history == vec![10_000; 10], || {
                format!("history {candidate_history:?}")
            })?;
        }
        other => return Err(format!("passive campaign ended with {other:?}")),
    }
    Ok(format!(
        "mean sessions Enhanced {enh_mean:.2} > SM(n=7) {sm_mean:.2}; passive set stays 10000 for 10 sessions"
    ))
}

fn cli_determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("ssplab-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cases: [&[&str]; 6] = [
        &[
            "pair",
            "--variant",
            "enhanced",
            "--passkey",
            "123456",
            "--seed",
            "7",
        ],
        &[
            "pair",
            "--variant",
            "original",
            "--passkey",
            "123456",
            "--passkey-b",
            "123457",
            "--seed",
            "7",
        ],
        &[
            "attack",
            "--variant",
            "sm",
            "--space",
            "10000",
            "--seed",
            "7",
        ],
        &["costs", "--variant", "all", "--curve", "p192"],
        &[
            "fig4", "--trials", "5", "--space", "10000", "--seed", "7", "--format", "json",
        ],
        &[
            "matrix",
            "--trials",
            "50",
            "--mode",
            "mitm-guess",
            "--space",
            "100",
            "--seed",
            "7",
        ],
    ];
    let run = |args: &[&str], name: &str| -> Result<Vec<u8>, String> {
        let path = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ssplab"))
            .args(args)
            .arg("--out")
            .arg(&path)
            .env_remove("SSPLAB_SEED")
            .stderr(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        ensure(matches!(status.code(), Some(0 | 1)), || {
            format!("{args:?} exited {status}")
        })?;
        fs::read(&path).map_err(|e| e.to_string())
    };
    for (i, args) in cases.iter().enumerate() {
        let first = run(args, &format!("{i}-1"))?;
        let second = run(args, &format!("{i}-2"))?;
        ensure(!first.is_empty() && first == second, || {
            format!("{args:?} output differs")
        })?;
    }
    let _ = fs::remove_dir_all(&dir);
    Ok(format!(
        "{} subcommand invocations byte-identical on rerun",
        cases.len()
    ))
}

fn one_time_pad() -> Check {
    let mut rng = Rng::from_seed(8);
    for s in 0..1000 {
        let pk = Passkey::new(rng.passkey()).expect("in range");
        let mut session = Session::honest(Variant::Enhanced, CurveId::P256, pk, pk, &mut rng);
        let status = session.run(&mut rng, &mut Passthrough);
        ensure(status.is_success(), || format!("session {s}: {status:?}"))?;
        let rp = *session.a.rprime().ok_or("no r'")?;
        for side in [Role::A, Role::B] {
            let party = session.party(side);
            let mut blocks = party.masked_blocks().to_vec();
            blocks.sort_unstable();
            blocks.dedup();
            ensure(blocks.len() == party.masked_blocks().len(), || {
                format!("session {s} side {side}: a block masked twice")
            })?;
            let receiver = session.party(side.peer());
            for m in session
                .transcript()
                .messages()
                .iter()
                .filter(|m| m.sender == side && m.kind == MessageKind::MaskedPosition)
            {
                let i = usize::from(m.round.ok_or("unnumbered mask")?) - 1;
                let decoded = m.payload[0] ^ rp.0[i];
                ensure(decoded == party.drawn_positions()[i], || {
                    format!("session {s} side {side} round {}: decoded {decoded}", i + 1)
                })?;
                ensure(receiver.disclosures()[i].0 == decoded, || {
                    format!("session {s}: receiver used a different position")
                })?;
            }
        }
    }
    Ok(
        "1000 Enhanced sessions: each block masks at most once per side, every n' round-trips"
            .into(),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("cost exactness", cost_exactness),
        ("honest completion", honest_completion),
        ("passive break of Original", passive_break),
        ("MITM guessing odds", mitm_odds),
        ("session-count experiment shape", fig4_shape),
        ("SM vulnerable, Enhanced resistant", sm_vs_enhanced),
        ("CLI determinism", cli_determinism),
        ("one-time-pad discipline", one_time_pad),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} [{elapsed:.1?}] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{elapsed:.1?}] {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
