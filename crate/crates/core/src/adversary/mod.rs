//! Dishonest strategies and the experiments that measure them.
//!
//! Every Monte-Carlo experiment returns an [`AttackReport`]: seed, trial
//! count, the echoed configuration, the parameter-relation check and one
//! [`Estimate`] with a binomial interval per measured rate.

mod exact;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::device::{ClassicalStrategy, DeviceKind};
use crate::protocols::{
    run_protocol1, run_protocol4, run_selftest_round, Protocol1Options, Protocol1Run, Protocol4Options, Protocol4Run, ProtocolConfig, ReceiverPolicy, ReceiverStrategy,
    RelationReport, RoundType, SelfTestMode, Verdict,
};
use crate::entcf::ChallengeType;
use crate::rng::SeedTree;

pub use exact::{protocol1_receiver_tv, receiver_security_tv, sender_security_exact, SenderSecurityExact, TvReport};

/// Width of every reported interval, in standard deviations.
pub const INTERVAL_Z: f64 = 3.0;

/// A binomial rate with its Wilson score interval at [`INTERVAL_Z`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    /// Plug-in standard error `sqrt(rate (1 - rate) / trials)`.
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { successes, trials, rate: 0.0, std_error: 0.0, ci_low: 0.0, ci_high: 1.0 };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = INTERVAL_Z * INTERVAL_Z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = INTERVAL_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            successes,
            trials,
            rate: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
            ci_low: (centre - half).max(0.0),
            ci_high: (centre + half).min(1.0),
        }
    }

    /// `|rate - p| <= k sigma` with `sigma` the binomial deviation under `p`.
    pub fn within_sigma(&self, p: f64, k: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials.max(1) as f64).sqrt();
        (self.rate - p).abs() <= k * sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub experiment: String,
    pub seed: u64,
    pub trials: usize,
    pub config: ProtocolConfig,
    pub strategy: serde_json::Value,
    pub relations: RelationReport,
    pub estimates: BTreeMap<String, Estimate>,
    pub values: BTreeMap<String, f64>,
}

impl AttackReport {
    fn new(experiment: &str, seed: u64, trials: usize, config: &ProtocolConfig, strategy: serde_json::Value, rounds: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            trials,
            config: config.clone(),
            strategy,
            relations: config.relations(rounds),
            estimates: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    }

    fn estimate(&mut self, name: &str, successes: usize, trials: usize) {
        self.estimates.insert(name.to_string(), Estimate::new(successes as u64, trials as u64));
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.get(name)
    }
}

/// A receiver that may carry at most `capacity` qubits past the storage
/// checkpoint and measures everything else by `policy` before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedStorage {
    pub capacity: usize,
    pub policy: ReceiverPolicy,
}

impl BoundedStorage {
    /// Rounds kept unmeasured out of `rounds`; the lab refuses more at the checkpoint.
    pub fn stored(&self, rounds: usize) -> Vec<usize> {
        (0..self.capacity.min(rounds)).collect()
    }

    pub fn strategy(&self) -> ReceiverStrategy {
        ReceiverStrategy::Bounded { capacity: self.capacity, policy: self.policy }
    }
}

pub fn bounded_receiver_strategy(capacity: usize, policy: ReceiverPolicy) -> ReceiverStrategy {
    BoundedStorage { capacity, policy }.strategy()
}

pub fn classical_device_strategy(kind: ClassicalStrategy) -> DeviceKind {
    DeviceKind::Classical { strategy: kind }
}

pub fn echo<T: Serialize>(value: T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data")
}

fn require_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    Ok(())
}

/// One run of the OT protocol against a (possibly dishonest) receiver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackTrial {
    pub aborted: bool,
    /// The receiver's effective choice `C'`.
    pub choice: u8,
    /// Receiver output (or guess) equals `s_{C'}`.
    pub chosen: bool,
    /// Guess of `s_{1-C'}` is right; always false for honest receivers.
    pub other: bool,
    pub guessed_corrections: usize,
    pub tested: usize,
    pub failed: usize,
}

fn score(outcome: &crate::protocols::OtOutcome, guesses: Option<[crate::bits::BitString; 2]>) -> (bool, bool) {
    if outcome.aborted {
        return (false, false);
    }
    let c = usize::from(outcome.choice_bit);
    let strings = [outcome.s0.clone(), outcome.s1.clone()];
    match guesses {
        Some(g) => (Some(&g[c]) == strings[c].as_ref(), Some(&g[1 - c]) == strings[1 - c].as_ref()),
        None => (outcome.correct(), false),
    }
}

/// Scores a finished run of the Bell-pair protocol.
pub fn p1_trial(run: &Protocol1Run) -> AttackTrial {
    let (chosen, other) = score(&run.outcome, run.guesses.clone());
    AttackTrial { aborted: false, choice: run.outcome.choice_bit, chosen, other, guessed_corrections: 0, tested: 0, failed: 0 }
}

/// Scores a finished run of the device-independent protocol.
pub fn p4_trial(run: &Protocol4Run) -> AttackTrial {
    let (chosen, other) = score(&run.outcome, run.guesses.clone());
    AttackTrial {
        aborted: run.outcome.aborted,
        choice: run.outcome.choice_bit,
        chosen,
        other,
        guessed_corrections: run.guessed_corrections,
        tested: run.tested,
        failed: run.failed,
    }
}

pub fn p1_attack_trial(cfg: &ProtocolConfig, receiver: ReceiverStrategy, tree: SeedTree) -> Result<AttackTrial> {
    Ok(p1_trial(&run_protocol1(cfg, &Protocol1Options { receiver, ..Default::default() }, tree)?))
}

pub fn p4_attack_trial(cfg: &ProtocolConfig, opts: &Protocol4Options, tree: SeedTree) -> Result<AttackTrial> {
    Ok(p4_trial(&run_protocol4(cfg, opts, tree)?))
}

/// Success probability on `s_{1-C'}` when `k` correction bits are guessed
/// and a wrong input collides with probability `2^-l`.
pub fn guessing_prediction(k: usize, l: usize) -> f64 {
    let collide = 2f64.powi(-(l as i32));
    2f64.powi(-(k as i32)) * (1.0 - collide) + collide
}

/// Aggregates attack trials: `aborted` over all trials, `s_chosen`,
/// `s_other` and `both` over completed ones.
pub fn attack_report(experiment: &str, seed: u64, cfg: &ProtocolConfig, strategy: serde_json::Value, rounds: f64, trials: &[AttackTrial]) -> AttackReport {
    let done: Vec<&AttackTrial> = trials.iter().filter(|t| !t.aborted).collect();
    let mut report = AttackReport::new(experiment, seed, trials.len(), cfg, strategy, rounds);
    report.estimate("aborted", trials.len() - done.len(), trials.len());
    report.estimate("s_chosen", done.iter().filter(|t| t.chosen).count(), done.len());
    report.estimate("s_other", done.iter().filter(|t| t.other).count(), done.len());
    report.estimate("both", done.iter().filter(|t| t.chosen && t.other).count(), done.len());
    let mean = |f: &dyn Fn(&AttackTrial) -> f64| if done.is_empty() { 0.0 } else { done.iter().map(|t| f(t)).sum::<f64>() / done.len() as f64 };
    report.values.insert("uniform_guess".into(), 2f64.powi(-(cfg.l as i32)));
    report.values.insert("predicted_s_other".into(), mean(&|t| guessing_prediction(t.guessed_corrections, cfg.l)));
    report.values.insert("mean_guessed_corrections".into(), mean(&|t| t.guessed_corrections as f64));
    let fractions: Vec<f64> = trials.iter().map(|t| if t.tested == 0 { 0.0 } else { t.failed as f64 / t.tested as f64 }).collect();
    report.values.insert("mean_failed_fraction".into(), fractions.iter().sum::<f64>() / trials.len().max(1) as f64);
    report
}

fn parallel_trials<F>(trials: usize, seed: u64, f: F) -> Result<Vec<AttackTrial>>
where
    F: Fn(SeedTree) -> Result<AttackTrial> + Sync,
{
    require_trials(trials)?;
    let root = SeedTree::new(seed);
    (0..trials).into_par_iter().map(|t| f(root.trial(t))).collect()
}

/// Options of the unlimited-storage attack on the device-independent
/// protocol. The choice bit is fixed to 1, so without the trapdoors the
/// receiver must guess `v^beta` on every generation round in `I~_0`.
pub fn unbounded_p4_options(uses_trapdoors: bool) -> Protocol4Options {
    Protocol4Options { receiver: ReceiverStrategy::Unbounded, attack_uses_trapdoors: uses_trapdoors, forced_choice: Some(1), ..Default::default() }
}

/// Unlimited storage against the Bell-pair protocol: keep everything, copy
/// the announced bases, learn both strings.
pub fn unbounded_receiver_attack(cfg: &ProtocolConfig, trials: usize, seed: u64) -> Result<AttackReport> {
    let rows = parallel_trials(trials, seed, |tree| p1_attack_trial(cfg, ReceiverStrategy::Unbounded, tree))?;
    Ok(attack_report("unbounded_receiver_p1", seed, cfg, echo(ReceiverStrategy::Unbounded), cfg.n as f64, &rows))
}

/// The same attack against the device-independent protocol; `s_other` is
/// compared with `predicted_s_other`.
pub fn unbounded_receiver_attack_p4(cfg: &ProtocolConfig, trials: usize, seed: u64, uses_trapdoors: bool) -> Result<AttackReport> {
    let opts = unbounded_p4_options(uses_trapdoors);
    let rows = parallel_trials(trials, seed, |tree| p4_attack_trial(cfg, &opts, tree))?;
    Ok(attack_report("unbounded_receiver_p4", seed, cfg, echo(&opts), cfg.expected_generation_rounds(), &rows))
}

/// Guessing experiment against the Bell-pair protocol with bounded storage.
/// The echoed `gamma` is `capacity / n`.
pub fn bounded_receiver_experiment(cfg: &ProtocolConfig, storage: BoundedStorage, trials: usize, seed: u64) -> Result<AttackReport> {
    let cfg = ProtocolConfig { gamma: storage.capacity as f64 / cfg.n as f64, ..cfg.clone() };
    let rows = parallel_trials(trials, seed, |tree| p1_attack_trial(&cfg, storage.strategy(), tree))?;
    Ok(attack_report("bounded_receiver_p1", seed, &cfg, echo(storage), cfg.n as f64, &rows))
}

/// Abort rate of the device-independent protocol with honest parties and
/// the given device.
pub fn protocol4_abort_experiment(cfg: &ProtocolConfig, device: DeviceKind, trials: usize, seed: u64) -> Result<AttackReport> {
    let opts = Protocol4Options { device, ..Default::default() };
    let rows = parallel_trials(trials, seed, |tree| p4_attack_trial(cfg, &opts, tree))?;
    Ok(attack_report("protocol4_abort", seed, cfg, echo(&opts), cfg.expected_generation_rounds(), &rows))
}

/// One single-verifier self-test round as seen by the failure-rate experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRound {
    pub verdict: Verdict,
    pub rt: RoundType,
    pub ct: ChallengeType,
    /// Challenge type b with `x = y`.
    pub matched: bool,
}

pub fn device_round(cfg: &ProtocolConfig, device: DeviceKind, tree: SeedTree, index: usize) -> Result<DeviceRound> {
    let r = run_selftest_round(SelfTestMode::SingleVerifier, cfg, &device, tree, index)?.record;
    let verdict = r.w.ok_or_else(|| Error::Malformed("unchecked round".into()))?;
    Ok(DeviceRound { verdict, rt: r.rt, ct: r.ct, matched: r.x.is_some() && r.x == r.y })
}

pub fn device_rates_report(cfg: &ProtocolConfig, device: DeviceKind, seed: u64, rows: &[DeviceRound]) -> AttackReport {
    let count = |f: &dyn Fn(&DeviceRound) -> bool| rows.iter().filter(|r| f(r)).count();
    let bell = |r: &DeviceRound| r.rt == RoundType::Bell && r.matched;
    let mut report = AttackReport::new("device_failure_rates", seed, rows.len(), cfg, echo(device), cfg.n as f64);
    report.estimate("bell_matched_fail", count(&|r| bell(r) && r.verdict == Verdict::Fail), count(&bell));
    report.estimate("ct_a_pass", count(&|r| r.ct == ChallengeType::A && r.verdict == Verdict::Pass), count(&|r| r.ct == ChallengeType::A));
    report.estimate("fail", count(&|r| r.verdict == Verdict::Fail), rows.len());
    report
}

/// Runs self-test rounds in order until `matched_target` Bell rounds with
/// `x = y` were checked, capped at `64 * matched_target` rounds.
pub fn device_rounds_until(cfg: &ProtocolConfig, device: DeviceKind, matched_target: usize, seed: u64) -> Result<Vec<DeviceRound>> {
    require_trials(matched_target)?;
    const BATCH: usize = 4096;
    let root = SeedTree::new(seed);
    let cap = matched_target.saturating_mul(64);
    let mut rows = Vec::new();
    let mut matched = 0;
    while rows.len() < cap {
        let start = rows.len();
        let batch: Vec<DeviceRound> = (start..start + BATCH).into_par_iter().map(|i| device_round(cfg, device, root.trial(i), i)).collect::<Result<_>>()?;
        for row in batch {
            rows.push(row);
            if row.rt == RoundType::Bell && row.matched {
                matched += 1;
                if matched == matched_target {
                    return Ok(rows);
                }
            }
        }
    }
    Ok(rows)
}

/// Per-round behaviour of a device in single-verifier self-test rounds.
pub fn device_failure_rates(cfg: &ProtocolConfig, device: DeviceKind, matched_target: usize, seed: u64) -> Result<AttackReport> {
    let rows = device_rounds_until(cfg, device, matched_target, seed)?;
    Ok(device_rates_report(cfg, device, seed, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ProtocolConfig {
        ProtocolConfig { n: 32, l: 3, domain_bits: 4, ..Default::default() }
    }

    #[test]
    fn wilson_interval_brackets_the_rate() {
        let e = Estimate::new(30, 100);
        assert!(e.ci_low < 0.3 && 0.3 < e.ci_high);
        assert!(e.within_sigma(0.3, 0.0));
        let zero = Estimate::new(0, 50);
        assert_eq!(zero.ci_low, 0.0);
        assert!(zero.ci_high > 0.0);
    }

    #[test]
    fn unbounded_p1_recovers_both() {
        let r = unbounded_receiver_attack(&small(), 20, 1).unwrap();
        assert_eq!(r.get("both").unwrap().successes, 20);
        assert_eq!(r.relations.rounds, 32.0);
    }

    #[test]
    fn zero_capacity_with_choice_basis_learns_only_the_choice() {
        let storage = BoundedStorage { capacity: 0, policy: ReceiverPolicy::ChoiceBasis };
        assert!(storage.stored(10).is_empty());
        let r = bounded_receiver_experiment(&ProtocolConfig { n: 64, l: 2, ..Default::default() }, storage, 200, 2).unwrap();
        assert_eq!(r.get("s_chosen").unwrap().successes, 200);
        assert!(r.get("s_other").unwrap().within_sigma(0.25, 4.0));
        let full = bounded_receiver_experiment(&small(), BoundedStorage { capacity: 32, policy: ReceiverPolicy::RandomBases }, 20, 3).unwrap();
        assert_eq!(full.get("s_other").unwrap().successes, 20);
    }

    #[test]
    fn classical_rates_and_honest_rates() {
        let honest = device_failure_rates(&small(), DeviceKind::Honest, 50, 4).unwrap();
        assert_eq!(honest.get("fail").unwrap().successes, 0);
        let cheat = device_failure_rates(&small(), classical_device_strategy(ClassicalStrategy::ImageHonestBellRandom), 400, 5).unwrap();
        assert_eq!(cheat.get("bell_matched_fail").unwrap().trials, 400);
        assert!(cheat.get("bell_matched_fail").unwrap().within_sigma(0.5, 4.0));
        assert_eq!(cheat.get("ct_a_pass").unwrap().rate, 1.0);
    }

    #[test]
    fn trapdoorless_p4_attack_matches_prediction() {
        let cfg = ProtocolConfig { n: 128, l: 2, domain_bits: 4, ..Default::default() };
        let r = unbounded_receiver_attack_p4(&cfg, 60, 6, false).unwrap();
        assert_eq!(r.get("aborted").unwrap().successes, 0);
        assert_eq!(guessing_prediction(0, 2), 1.0);
        let chosen = r.get("s_chosen").unwrap();
        assert_eq!(chosen.successes, chosen.trials);
        let p = r.values["predicted_s_other"];
        assert!(r.get("s_other").unwrap().within_sigma(p, 4.0), "{r:?}");
        let with = unbounded_receiver_attack_p4(&cfg, 10, 6, true).unwrap();
        assert_eq!(with.get("s_other").unwrap().successes, 10);
    }
}
