use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::CommandFactory;
use serde::Serialize;
use ssplab_core::adversary::{
    attack_campaign_enhanced, attack_campaign_sm, passive_recover_original, Access, AdversaryError,
    CampaignParams, CapturedSession, EnhancedAttack,
};
use ssplab_core::crypto::{hash_invocations, CurveId, LinkKey, Rng};
use ssplab_core::protocol::{
    run_session, DeviceIdentity, Passkey, Role, SessionStatus, Transcript, Variant,
};
use ssplab_core::sim::{
    account_costs, costs_csv, fig4_csv, matrix_csv, run_fig4, run_matrix, to_json, ExperimentSpec,
};

use crate::{
    AccessChoice, AttackArgs, Cli, Command, CostsArgs, ExperimentArgs, Fig4Args, Format,
    MatrixArgs, Output, PairArgs, VariantChoice,
};

/// Pairing aborted, or the run itself failed. Usage errors exit 2 through clap.
const EXIT_ABORT: u8 = 1;

enum Failure {
    Usage(String),
    Runtime(String),
}

type Outcome = Result<ExitCode, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

pub fn dispatch(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Pair(args) => pair(args),
        Command::Attack(args) => attack(args),
        Command::Costs(args) => costs(args),
        Command::Fig4(args) => fig4(args),
        Command::Matrix(args) => matrix(args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::InvalidValue, msg).exit(),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ABORT)
        }
    }
}

fn emit(
    output: &Output,
    default: Format,
    json: impl FnOnce() -> String,
    csv: impl FnOnce() -> Result<String, Failure>,
) -> Result<(), Failure> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => json(),
        Format::Csv => csv()?,
    };
    match &output.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn single_variant(choice: VariantChoice) -> Result<Variant, Failure> {
    match choice.expand().as_slice() {
        [v] => Ok(*v),
        _ => Err(Failure::Usage("--variant all is not accepted here".into())),
    }
}

fn csv_row<T: Serialize>(row: &T) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(row).map_err(runtime)?;
    String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
}

#[derive(Serialize)]
struct PairReport {
    variant: Variant,
    curve: CurveId,
    seed: u64,
    #[serde(flatten)]
    status: SessionStatus,
    link_key_a: Option<LinkKey>,
    link_key_b: Option<LinkKey>,
    messages: usize,
    phase2_bits: u64,
}

#[derive(Serialize)]
struct PairRow {
    variant: Variant,
    curve: CurveId,
    seed: u64,
    status: &'static str,
    abort_round: Option<u8>,
    link_key_a: Option<LinkKey>,
    link_key_b: Option<LinkKey>,
    messages: usize,
    phase2_bits: u64,
}

fn status_label(status: &SessionStatus) -> &'static str {
    match status {
        SessionStatus::Success => "success",
        SessionStatus::AbortPhase1 { .. } => "abort_phase1",
        SessionStatus::AbortPhase2 { .. } => "abort_phase2",
        SessionStatus::AbortPhase3 { .. } => "abort_phase3",
        SessionStatus::Stalled => "stalled",
    }
}

fn describe_abort(status: &SessionStatus) -> String {
    let reason = |r: &ssplab_core::protocol::AbortReason| {
        serde_json::to_value(r)
            .ok()
            .and_then(|v| v["reason"].as_str().map(str::to_string))
            .unwrap_or_default()
    };
    match status {
        SessionStatus::AbortPhase1 { side, reason: r } => {
            format!("aborted in phase 1 at device {side}: {}", reason(r))
        }
        SessionStatus::AbortPhase2 {
            round,
            side,
            reason: r,
        } => {
            format!(
                "aborted in phase 2, round {round}, at device {side}: {}",
                reason(r)
            )
        }
        SessionStatus::AbortPhase3 { side, reason: r } => {
            format!("aborted in phase 3 at device {side}: {}", reason(r))
        }
        SessionStatus::Stalled => "stalled before both devices finished".into(),
        SessionStatus::Success => "success".into(),
    }
}

fn pair(args: PairArgs) -> Outcome {
    let variant = single_variant(args.variant)?;
    let curve = CurveId::from(args.curve);
    let mut rng = Rng::from_seed(args.seed);
    let out = run_session(
        variant,
        curve,
        args.passkey,
        args.passkey_b.unwrap_or(args.passkey),
        DeviceIdentity::default_for(Role::A),
        DeviceIdentity::default_for(Role::B),
        &mut rng,
    );
    if let Some(path) = &args.transcript {
        fs::write(path, out.transcript.to_jsonl())
            .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    let report = PairReport {
        variant,
        curve,
        seed: args.seed,
        status: out.status.clone(),
        link_key_a: out.link_key_a,
        link_key_b: out.link_key_b,
        messages: out.transcript.len(),
        phase2_bits: out.transcript.phase2_bits(),
    };
    emit(
        &args.output,
        Format::Json,
        || to_json(&report),
        || {
            csv_row(&PairRow {
                variant,
                curve,
                seed: args.seed,
                status: status_label(&report.status),
                abort_round: report.status.abort_round(),
                link_key_a: report.link_key_a,
                link_key_b: report.link_key_b,
                messages: report.messages,
                phase2_bits: report.phase2_bits,
            })
        },
    )?;
    if out.status.is_success() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("pairing {}", describe_abort(&out.status));
        Ok(ExitCode::from(EXIT_ABORT))
    }
}

#[derive(Serialize)]
struct PassiveReport {
    variant: Variant,
    access: &'static str,
    true_passkey: Option<Passkey>,
    recovered: Passkey,
    correct: Option<bool>,
    f1_evaluations: u64,
}

#[derive(Serialize)]
struct CampaignReport {
    variant: Variant,
    access: &'static str,
    space: u32,
    known_bits: Option<u8>,
    max_sessions: u32,
    true_passkey: Passkey,
    outcome: &'static str,
    sessions_used: u32,
    recovered: Option<Passkey>,
    surviving: usize,
    candidate_history: Vec<usize>,
}

#[derive(Serialize)]
struct CampaignRow<'a> {
    variant: Variant,
    access: &'static str,
    space: u32,
    known_bits: Option<u8>,
    true_passkey: Passkey,
    outcome: &'static str,
    sessions_used: u32,
    recovered: Option<Passkey>,
    surviving: usize,
    candidate_history: &'a str,
}

fn read_capture(path: &Path, curve: CurveId) -> Result<CapturedSession, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("--transcript {}: {e}", path.display())))?;
    let transcript = Transcript::from_jsonl(&text)
        .map_err(|e| Failure::Usage(format!("--transcript {}: {e}", path.display())))?;
    Ok(CapturedSession {
        variant: Variant::Original,
        curve,
        transcript,
        dhkey: None,
        status: SessionStatus::Success,
    })
}

fn attack(args: AttackArgs) -> Outcome {
    let variant = single_variant(args.variant)?;
    let curve = CurveId::from(args.curve);
    if args.space == 0 || args.space > Passkey::MAX + 1 {
        return Err(Failure::Usage(format!(
            "--space must be in 1..=1000000, got {}",
            args.space
        )));
    }
    let mut rng = Rng::from_seed(args.seed);
    let truth = match args.passkey {
        Some(p) if p.value() >= args.space => {
            return Err(Failure::Usage(format!(
                "--passkey {p} lies outside --space {}",
                args.space
            )))
        }
        Some(p) => p,
        None => Passkey::new(rng.below(args.space)).expect("space within passkey range"),
    };

    if variant == Variant::Original {
        let (capture, known) = match &args.transcript {
            Some(path) => (read_capture(path, curve)?, None),
            None => {
                let out = run_session(
                    variant,
                    curve,
                    truth,
                    truth,
                    DeviceIdentity::default_for(Role::A),
                    DeviceIdentity::default_for(Role::B),
                    &mut rng,
                );
                let capture = CapturedSession {
                    variant,
                    curve,
                    transcript: out.transcript,
                    dhkey: None,
                    status: out.status,
                };
                (capture, Some(truth))
            }
        };
        let before = hash_invocations();
        let recovered = passive_recover_original(&capture).map_err(runtime)?;
        let report = PassiveReport {
            variant,
            access: "passive",
            true_passkey: known,
            recovered,
            correct: known.map(|k| k == recovered),
            f1_evaluations: hash_invocations() - before,
        };
        emit(
            &args.output,
            Format::Json,
            || to_json(&report),
            || csv_row(&report),
        )?;
        return Ok(ExitCode::SUCCESS);
    }

    let params = CampaignParams {
        curve,
        space_bound: args.space,
        max_sessions: args.max_sessions,
    };
    let (result, known_bits, access) = match variant {
        Variant::Sm => {
            let n = match args.known_bits.as_slice() {
                [n] => *n,
                _ => {
                    return Err(Failure::Usage(
                        "--known-bits takes one value for attack".into(),
                    ))
                }
            };
            if !(1..=20).contains(&n) {
                return Err(Failure::Usage(format!(
                    "--known-bits must be in 1..=20, got {n}"
                )));
            }
            (
                attack_campaign_sm(truth, n, &params, &mut rng),
                Some(n),
                "mitm",
            )
        }
        _ => {
            let (access, label) = match args.access {
                AccessChoice::Mitm => (Access::Mitm, "mitm"),
                AccessChoice::Passive => (Access::Passive, "passive"),
            };
            let attack = EnhancedAttack {
                access,
                use_abort_signal: args.abort_signal,
            };
            (
                attack_campaign_enhanced(truth, attack, &params, &mut rng),
                None,
                label,
            )
        }
    };
    let (outcome, sessions_used, recovered, history) = match result {
        Ok(r) => (
            "recovered",
            r.sessions_used,
            Some(r.recovered),
            r.candidate_history,
        ),
        Err(AdversaryError::MaxSessionsExceeded {
            sessions,
            candidate_history,
            ..
        }) => ("max_sessions_exceeded", sessions, None, candidate_history),
        Err(e) => return Err(runtime(e)),
    };
    let report = CampaignReport {
        variant,
        access,
        space: args.space,
        known_bits,
        max_sessions: args.max_sessions,
        true_passkey: truth,
        outcome,
        sessions_used,
        recovered,
        surviving: history.last().copied().unwrap_or(args.space as usize),
        candidate_history: history,
    };
    emit(
        &args.output,
        Format::Json,
        || to_json(&report),
        || {
            let history = report
                .candidate_history
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";");
            csv_row(&CampaignRow {
                variant,
                access,
                space: report.space,
                known_bits,
                true_passkey: truth,
                outcome,
                sessions_used,
                recovered,
                surviving: report.surviving,
                candidate_history: &history,
            })
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

fn costs(args: CostsArgs) -> Outcome {
    let curve = CurveId::from(args.curve);
    let rows = args
        .variant
        .expand()
        .into_iter()
        .map(|v| account_costs(v, curve))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    emit(
        &args.output,
        Format::Csv,
        || to_json(&rows),
        || costs_csv(&rows).map_err(runtime),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn load_spec(common: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
            ExperimentSpec::parse(&text)
                .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(t) = common.trials {
        spec.trials = t;
    }
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if let Some(s) = common.space {
        spec.space_bound = s;
    }
    if let Some(m) = common.max_sessions {
        spec.max_sessions = m;
    }
    if let Some(c) = common.curve {
        spec.curve = c.into();
    }
    Ok(spec)
}

fn checked(spec: ExperimentSpec) -> Result<ExperimentSpec, Failure> {
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

fn fig4(args: Fig4Args) -> Outcome {
    let mut spec = load_spec(&args.common)?;
    if spec.name.is_empty() {
        spec.name = "fig4".into();
    }
    if let Some(bits) = args.known_bits {
        spec.known_bits = bits;
    }
    let spec = checked(spec)?;
    let rows = run_fig4(&spec).map_err(|e| match e {
        ssplab_core::sim::SimError::InvalidSpec(m) => Failure::Usage(m),
        other => runtime(other),
    })?;
    emit(
        &args.common.output,
        Format::Csv,
        || to_json(&rows),
        || fig4_csv(&rows).map_err(runtime),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn matrix(args: MatrixArgs) -> Outcome {
    let mut spec = load_spec(&args.common)?;
    if let Some(v) = args.variant {
        spec.variants = v.expand();
    }
    if let Some(m) = args.mode {
        spec.mode = m.into();
    }
    if let Some(p) = args.passkey_policy {
        spec.passkey_policy = p.into();
    }
    let spec = checked(spec)?;
    let rows = run_matrix(&spec).map_err(runtime)?;
    emit(
        &args.common.output,
        Format::Csv,
        || to_json(&rows),
        || matrix_csv(&rows).map_err(runtime),
    )?;
    Ok(ExitCode::SUCCESS)
}
