//! `diot`: runs one experiment and writes its JSON-lines report.
//!
//! Exit status is 0 when every assertion held, 1 when one failed (or a
//! replayed transcript disagrees with its recomputation) and 2 when the
//! configuration or input could not be used.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diot_core::harness::{exit_code, replay_transcript, run_experiment, AttackKind, ExperimentKind, ExperimentParams, ExperimentReport, ExperimentSpec};
use diot_core::protocols::device::{ClassicalStrategy, DeviceKind};
use diot_core::protocols::{ProtocolConfig, ReceiverPolicy, ReceiverStrategy, SelfTestMode, SenderScript};
use diot_core::Error;

#[derive(Parser, Debug)]
#[command(name = "diot", version, about = "Simulated randomized oblivious transfer experiments")]
struct Cli {
    /// Replay a stored transcript instead of running an experiment.
    #[arg(long, global = true, value_name = "TRANSCRIPT")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bell-pair oblivious transfer.
    Ot1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArgs,
        /// Directory for one transcript per trial.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Individual self-test rounds.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Device::Honest)]
        device: Device,
        #[arg(long, value_enum, default_value_t = Mode::SingleVerifier)]
        mode: Mode,
    },
    /// Repeated estimation of the self-test failure rate.
    EstimateDelta {
        #[command(flatten)]
        common: Common,
        /// Play a synthetic game failing with this probability.
        #[arg(long)]
        synthetic_failure: Option<f64>,
        #[arg(long, value_enum, default_value_t = Device::Honest)]
        device: Device,
    },
    /// Device-independent oblivious transfer.
    Ot4 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArgs,
        #[arg(long, value_enum, default_value_t = Sender::Honest)]
        sender: Sender,
        #[arg(long, value_enum, default_value_t = Device::Honest)]
        device: Device,
        /// A dishonest receiver guesses its corrections instead of using the trapdoors.
        #[arg(long)]
        no_trapdoors: bool,
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Attack and security experiments.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Attack::UnboundedP1)]
        attack: Attack,
        #[arg(long, value_enum, default_value_t = Device::Honest)]
        device: Device,
        #[arg(long, value_enum, default_value_t = Sender::Honest)]
        sender: Sender,
        #[arg(long, default_value_t = 0)]
        capacity: usize,
        #[arg(long, value_enum, default_value_t = Policy::RandomBases)]
        policy: Policy,
        #[arg(long)]
        no_trapdoors: bool,
    },
    /// Numerical suites for the entropy inequalities.
    BoundsCheck {
        #[command(flatten)]
        common: Common,
        /// Instances per suite (default: 500, 200, 50, 200).
        #[arg(long)]
        instances: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON document with protocol parameters; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReceiverArgs {
    #[arg(long, value_enum, default_value_t = Receiver::Honest)]
    receiver: Receiver,
    /// Qubits a bounded receiver keeps.
    #[arg(long, default_value_t = 0)]
    capacity: usize,
    #[arg(long, value_enum, default_value_t = Policy::RandomBases)]
    policy: Policy,
}

impl ReceiverArgs {
    fn strategy(&self) -> ReceiverStrategy {
        match self.receiver {
            Receiver::Honest => ReceiverStrategy::Honest,
            Receiver::Unbounded => ReceiverStrategy::Unbounded,
            Receiver::Bounded => ReceiverStrategy::Bounded { capacity: self.capacity, policy: self.policy.into() },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Receiver {
    Honest,
    Bounded,
    Unbounded,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    RandomBases,
    Computational,
    ChoiceBasis,
}

impl From<Policy> for ReceiverPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::RandomBases => ReceiverPolicy::RandomBases,
            Policy::Computational => ReceiverPolicy::Computational,
            Policy::ChoiceBasis => ReceiverPolicy::ChoiceBasis,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Device {
    Honest,
    Leaky,
    RandomAnswers,
    ImageHonestBellRandom,
    BestKnown,
}

impl From<Device> for DeviceKind {
    fn from(d: Device) -> Self {
        let classical = |strategy| DeviceKind::Classical { strategy };
        match d {
            Device::Honest => DeviceKind::Honest,
            Device::Leaky => DeviceKind::Leaky,
            Device::RandomAnswers => classical(ClassicalStrategy::RandomAnswers),
            Device::ImageHonestBellRandom => classical(ClassicalStrategy::ImageHonestBellRandom),
            Device::BestKnown => classical(ClassicalStrategy::BestKnown),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sender {
    Honest,
    AlwaysCtB,
    AdversarialKeys,
    InvalidTildeI,
}

impl From<Sender> for SenderScript {
    fn from(s: Sender) -> Self {
        match s {
            Sender::Honest => SenderScript::Honest,
            Sender::AlwaysCtB => SenderScript::AlwaysCtB,
            Sender::AdversarialKeys => SenderScript::AdversarialKeys,
            Sender::InvalidTildeI => SenderScript::InvalidTildeI,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    SingleVerifier,
    TwoVerifier,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Attack {
    UnboundedP1,
    UnboundedP4,
    BoundedStorage,
    DeviceRates,
    Abort,
    ReceiverTv,
    SenderExact,
}

impl From<Attack> for AttackKind {
    fn from(a: Attack) -> Self {
        match a {
            Attack::UnboundedP1 => AttackKind::UnboundedP1,
            Attack::UnboundedP4 => AttackKind::UnboundedP4,
            Attack::BoundedStorage => AttackKind::BoundedStorage,
            Attack::DeviceRates => AttackKind::DeviceRates,
            Attack::Abort => AttackKind::Abort,
            Attack::ReceiverTv => AttackKind::ReceiverTv,
            Attack::SenderExact => AttackKind::SenderExact,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ProtocolConfig, Error> {
    let Some(path) = path else { return Ok(ProtocolConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn default_trials(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::Selftest => 500,
        ExperimentKind::EstimateDelta => 1000,
        ExperimentKind::BoundsCheck => 1,
        _ => 100,
    }
}

fn build(command: Command) -> Result<ExperimentSpec, Error> {
    let mut params = ExperimentParams::default();
    let (kind, common) = match command {
        Command::Ot1 { common, receiver, transcripts } => {
            params.receiver = receiver.strategy();
            params.transcripts = transcripts;
            (ExperimentKind::Ot1, common)
        }
        Command::Selftest { common, device, mode } => {
            params.device = device.into();
            params.mode = match mode {
                Mode::SingleVerifier => SelfTestMode::SingleVerifier,
                Mode::TwoVerifier => SelfTestMode::TwoVerifier,
            };
            (ExperimentKind::Selftest, common)
        }
        Command::EstimateDelta { common, synthetic_failure, device } => {
            params.synthetic_failure = synthetic_failure;
            params.device = device.into();
            (ExperimentKind::EstimateDelta, common)
        }
        Command::Ot4 { common, receiver, sender, device, no_trapdoors, transcripts } => {
            params.receiver = receiver.strategy();
            params.sender = sender.into();
            params.device = device.into();
            params.attack_uses_trapdoors = !no_trapdoors;
            params.transcripts = transcripts;
            (ExperimentKind::Ot4, common)
        }
        Command::Attack { common, attack, device, sender, capacity, policy, no_trapdoors } => {
            params.attack = attack.into();
            params.device = device.into();
            params.sender = sender.into();
            params.capacity = capacity;
            params.policy = policy.into();
            params.attack_uses_trapdoors = !no_trapdoors;
            (ExperimentKind::Attack, common)
        }
        Command::BoundsCheck { common, instances } => {
            params.instances = instances;
            (ExperimentKind::BoundsCheck, common)
        }
    };
    let mut config = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(ExperimentSpec { kind, config, trials: common.trials.unwrap_or(default_trials(kind)), output: common.out, params })
}

fn run(cli: Cli) -> i32 {
    if let Some(path) = cli.replay {
        let result = replay_transcript(&path);
        match &result {
            Ok(v) => println!("{}", serde_json::to_string(v).expect("verdict serializes")),
            Err(e) => eprintln!("replay failed: {e}"),
        }
        return exit_code(&result, |_| true);
    }
    let Some(command) = cli.command else {
        eprintln!("nothing to do: give a subcommand or --replay");
        return 2;
    };
    let result = build(command).and_then(|spec| {
        let report = run_experiment(&spec)?;
        if spec.output.is_none() {
            print!("{}", report.text());
        }
        Ok(report)
    });
    match &result {
        Ok(report) => {
            for a in report.assertions.iter().filter(|a| !a.passed) {
                eprintln!("assertion failed: {}: {}", a.name, a.detail);
            }
            let held = report.assertions.iter().filter(|a| a.passed).count();
            eprintln!("{held}/{} assertions held", report.assertions.len());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result, ExperimentReport::passed)
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()) as u8)
}
