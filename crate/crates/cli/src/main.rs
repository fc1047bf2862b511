mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssplab_core::crypto::CurveId;
use ssplab_core::protocol::{Passkey, Variant};
use ssplab_core::sim::{MatrixMode, PasskeyPolicy};

/// Simulate passkey-entry pairing, attack it, and tabulate costs.
#[derive(Debug, Parser)]
#[command(name = "ssplab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one pairing between two simulated devices.
    Pair(PairArgs),
    /// Run an attack and report what the attacker recovered.
    Attack(AttackArgs),
    /// Per-variant communication, computation and storage costs.
    Costs(CostsArgs),
    /// Sessions needed to recover a passkey when n bits of r* leak per session.
    Fig4(Fig4Args),
    /// Batch sessions per variant and summarize outcomes.
    Matrix(MatrixArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantChoice {
    Original,
    Sm,
    Enhanced,
    All,
}

impl VariantChoice {
    pub fn expand(self) -> Vec<Variant> {
        match self {
            VariantChoice::Original => vec![Variant::Original],
            VariantChoice::Sm => vec![Variant::Sm],
            VariantChoice::Enhanced => vec![Variant::Enhanced],
            VariantChoice::All => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveChoice {
    P192,
    P256,
}

impl From<CurveChoice> for CurveId {
    fn from(c: CurveChoice) -> Self {
        match c {
            CurveChoice::P192 => CurveId::P192,
            CurveChoice::P256 => CurveId::P256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Honest,
    MitmGuess,
    MitmOracle,
    Relay,
}

impl From<ModeChoice> for MatrixMode {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::Honest => MatrixMode::Honest,
            ModeChoice::MitmGuess => MatrixMode::MitmGuess,
            ModeChoice::MitmOracle => MatrixMode::MitmOracle,
            ModeChoice::Relay => MatrixMode::Relay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    Fresh,
    Reused,
}

impl From<PolicyChoice> for PasskeyPolicy {
    fn from(p: PolicyChoice) -> Self {
        match p {
            PolicyChoice::Fresh => PasskeyPolicy::FreshEachSession,
            PolicyChoice::Reused => PasskeyPolicy::ReusedAcrossSessions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AccessChoice {
    Mitm,
    Passive,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, value_enum, default_value = "enhanced")]
    pub variant: VariantChoice,
    /// Passkey typed on device A, six digits.
    #[arg(long)]
    pub passkey: Passkey,
    /// Passkey typed on device B. Defaults to device A's.
    #[arg(long)]
    pub passkey_b: Option<Passkey>,
    #[arg(long, env = "SSPLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "p256")]
    pub curve: CurveChoice,
    /// Also write the message transcript as JSON lines.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum, default_value = "sm")]
    pub variant: VariantChoice,
    /// The devices' passkey. Drawn from the seed when absent.
    #[arg(long)]
    pub passkey: Option<Passkey>,
    #[arg(long, env = "SSPLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "p256")]
    pub curve: CurveChoice,
    /// Passkeys are drawn from 0..SPACE.
    #[arg(long, default_value_t = 1_000_000)]
    pub space: u32,
    /// Bits of r* the attacker learns per session.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub known_bits: Vec<u8>,
    #[arg(long, default_value_t = 50)]
    pub max_sessions: u32,
    #[arg(long, value_enum, default_value = "mitm")]
    pub access: AccessChoice,
    /// Also learn from whether devices accepted the attacker's commitments.
    #[arg(long)]
    pub abort_signal: bool,
    /// For original: read the captured session from this JSON-lines file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub variant: VariantChoice,
    #[arg(long, value_enum, default_value = "p256")]
    pub curve: CurveChoice,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment spec, JSON or key = value lines. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long, env = "SSPLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub space: Option<u32>,
    #[arg(long)]
    pub max_sessions: Option<u32>,
    #[arg(long, value_enum)]
    pub curve: Option<CurveChoice>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Fig4Args {
    #[arg(long, value_delimiter = ',')]
    pub known_bits: Option<Vec<u8>>,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long, value_enum)]
    pub variant: Option<VariantChoice>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long, value_enum)]
    pub passkey_policy: Option<PolicyChoice>,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    commands::dispatch(cli)
}
