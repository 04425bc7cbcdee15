//! Batch execution of named experiments.
//!
//! A run writes one JSON line per trial followed by one summary line. Trial
//! `t` draws from `SeedTree::new(config.seed).trial(t)` and records are
//! emitted in trial order, so a fixed `ExperimentSpec` always produces the same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adversary::{
    attack_report, device_rates_report, device_rounds_until, echo, p1_attack_trial, p1_trial, p4_attack_trial, p4_trial, receiver_security_tv,
    sender_security_exact, unbounded_p4_options, AttackReport, AttackTrial, BoundedStorage, Estimate,
};
use crate::entropy::{chain_rule_suite, privacy_amplification_suite, split_suite, uncertainty_suite, SuiteReport};
use crate::error::{Error, Result};
use crate::protocols::device::DeviceKind;
use crate::protocols::transcript::Transcript;
use crate::protocols::{
    chernoff_confidence, estimate_delta, replay, run_protocol1, run_protocol4, run_selftest_round, Protocol1Options, Protocol4Options,
    ProtocolConfig, ReceiverPolicy, ReceiverStrategy, ReplayVerdict, RoundRecord, RoundType, SelfTestGame, SelfTestMode, SenderScript,
    SyntheticGame, Verdict,
};
use crate::rng::SeedTree;

/// Suite sizes used by `bounds_check` unless `instances` is given.
pub const DEFAULT_SUITE_SIZES: [(&str, usize); 4] = [("chain_rule", 500), ("uncertainty", 200), ("privacy_amplification", 50), ("split", 200)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ot1,
    Selftest,
    EstimateDelta,
    Ot4,
    Attack,
    BoundsCheck,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Unlimited storage against the Bell-pair protocol.
    #[default]
    UnboundedP1,
    /// Unlimited storage against the device-independent protocol.
    UnboundedP4,
    /// `capacity` qubits of storage against the Bell-pair protocol.
    BoundedStorage,
    /// Self-test failure rates of `device`; `trials` counts checked Bell
    /// rounds with matching bases.
    DeviceRates,
    /// Abort rate of the device-independent protocol with `device`.
    Abort,
    /// Exact receiver-security distance; one trial per derived seed.
    ReceiverTv,
    /// Exact sender-security distance of a storage-free receiver.
    SenderExact,
}

/// Knobs that select strategies within a kind. Unused fields are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub receiver: ReceiverStrategy,
    pub sender: SenderScript,
    pub device: DeviceKind,
    pub mode: SelfTestMode,
    /// Failure probability of a synthetic game; `None` plays `device`.
    pub synthetic_failure: Option<f64>,
    pub attack: AttackKind,
    pub capacity: usize,
    pub policy: ReceiverPolicy,
    pub attack_uses_trapdoors: bool,
    /// Directory receiving one transcript per protocol trial.
    pub transcripts: Option<PathBuf>,
    /// Instances per entropy suite.
    pub instances: Option<usize>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            receiver: ReceiverStrategy::Honest,
            sender: SenderScript::Honest,
            device: DeviceKind::Honest,
            mode: SelfTestMode::SingleVerifier,
            synthetic_failure: None,
            attack: AttackKind::UnboundedP1,
            capacity: 0,
            policy: ReceiverPolicy::RandomBases,
            attack_uses_trapdoors: true,
            transcripts: None,
            instances: None,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub config: ProtocolConfig,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: ExperimentParams,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: ProtocolConfig, trials: usize) -> Self {
        Self { kind, config, trials, output: None, params: ExperimentParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(p) = self.params.synthetic_failure {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("synthetic_failure = {p} must lie in [0, 1]")));
            }
        }
        self.config.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// Trial records followed by the summary, one JSON document per line.
    pub lines: Vec<String>,
    pub summary: Value,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// What one kind produces before the summary is assembled.
#[derive(Default)]
struct Outcome {
    records: Vec<Value>,
    estimates: BTreeMap<String, Estimate>,
    values: BTreeMap<String, Value>,
    assertions: Vec<Assertion>,
    /// Rounds at which the parameter relations are evaluated.
    rounds: Option<f64>,
}

impl Outcome {
    fn absorb(&mut self, report: &AttackReport) {
        self.estimates.extend(report.estimates.clone());
        self.values.extend(report.values.iter().map(|(k, v)| (k.clone(), json!(v))));
        self.rounds = Some(report.relations.rounds);
    }

    fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }

    fn rate(&self, name: &str) -> &Estimate {
        &self.estimates[name]
    }
}

fn per_trial<T, F>(spec: &ExperimentSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, SeedTree) -> Result<T> + Sync,
{
    let root = SeedTree::new(spec.config.seed);
    (0..spec.trials).into_par_iter().map(|t| f(t, root.trial(t))).collect()
}

fn trial_record(t: usize, body: impl Serialize) -> Value {
    json!({ "record": "trial", "trial": t, "result": body })
}

fn save_transcript(params: &ExperimentParams, t: usize, transcript: &Transcript) -> Result<()> {
    match &params.transcripts {
        Some(dir) => transcript.write(&dir.join(format!("trial-{t:06}.json"))),
        None => Ok(()),
    }
}

fn prepare_transcript_dir(params: &ExperimentParams) -> Result<()> {
    if let Some(dir) = &params.transcripts {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn trial_records(rows: &[AttackTrial]) -> Vec<Value> {
    rows.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect()
}

/// `s_other` of a storage-free receiver is right with probability `2^-l`.
fn assert_uniform_guess(out: &mut Outcome, cfg: &ProtocolConfig) {
    let target = 2f64.powi(-(cfg.l as i32));
    let e = out.rate("s_other").clone();
    out.assert("other_string_uniform", e.within_sigma(target, 3.0), format!("rate {:.5} vs 2^-l = {target:.5} +- 3 sigma over {} runs", e.rate, e.trials));
}

fn assert_both_learned(out: &mut Outcome) {
    let e = out.rate("both").clone();
    out.assert("both_strings_recovered", e.trials > 0 && e.successes == e.trials, format!("{}/{} completed runs", e.successes, e.trials));
}

fn assert_no_abort_and_correct(out: &mut Outcome) {
    let (a, c) = (out.rate("aborted").clone(), out.rate("s_chosen").clone());
    out.assert("completeness", a.successes == 0 && c.successes == c.trials, format!("{} aborts, {}/{} correct outputs", a.successes, c.successes, c.trials));
}

fn assert_classical_detected(out: &mut Outcome) {
    let a = out.rate("aborted").clone();
    out.assert("classical_device_aborts", a.rate >= 0.99, format!("abort rate {:.4} over {} runs, need >= 0.99", a.rate, a.trials));
}

fn run_ot1(spec: &ExperimentSpec) -> Result<Outcome> {
    let (cfg, p) = (&spec.config, &spec.params);
    prepare_transcript_dir(p)?;
    let opts = Protocol1Options { receiver: p.receiver, ..Default::default() };
    let rows = per_trial(spec, |t, tree| {
        let run = run_protocol1(cfg, &opts, tree)?;
        save_transcript(p, t, &run.transcript)?;
        Ok(p1_trial(&run))
    })?;
    let mut out = Outcome { records: trial_records(&rows), ..Default::default() };
    out.absorb(&attack_report("ot1", cfg.seed, cfg, echo(opts), cfg.n as f64, &rows));
    out.values.insert("success_rate".into(), json!(out.rate("s_chosen").rate));
    match p.receiver {
        ReceiverStrategy::Honest => {
            let e = out.rate("s_chosen").clone();
            out.assert("completeness", e.successes == e.trials, format!("{}/{} runs output s_c", e.successes, e.trials));
        }
        ReceiverStrategy::Unbounded => assert_both_learned(&mut out),
        ReceiverStrategy::Bounded { capacity: 0, .. } => assert_uniform_guess(&mut out, cfg),
        ReceiverStrategy::Bounded { .. } => {}
    }
    Ok(out)
}

fn run_ot4(spec: &ExperimentSpec) -> Result<Outcome> {
    let (cfg, p) = (&spec.config, &spec.params);
    prepare_transcript_dir(p)?;
    let opts = Protocol4Options {
        sender: p.sender,
        receiver: p.receiver,
        device: p.device,
        attack_uses_trapdoors: p.attack_uses_trapdoors,
        ..Default::default()
    };
    let rows = per_trial(spec, |t, tree| {
        let run = run_protocol4(cfg, &opts, tree)?;
        save_transcript(p, t, &run.transcript)?;
        Ok(p4_trial(&run))
    })?;
    let mut out = Outcome { records: trial_records(&rows), ..Default::default() };
    out.absorb(&attack_report("ot4", cfg.seed, cfg, echo(&opts), cfg.expected_generation_rounds(), &rows));
    let completed = rows.iter().filter(|r| !r.aborted).count();
    out.values.insert("success_rate".into(), json!(rows.iter().filter(|r| r.chosen).count() as f64 / rows.len() as f64));
    let honest_parties = p.sender == SenderScript::Honest && p.receiver.is_honest();
    match (p.device, p.receiver) {
        (DeviceKind::Classical { .. }, _) if honest_parties => assert_classical_detected(&mut out),
        (DeviceKind::Honest, ReceiverStrategy::Honest) if p.sender == SenderScript::Honest => assert_no_abort_and_correct(&mut out),
        (DeviceKind::Honest, ReceiverStrategy::Honest) if p.sender == SenderScript::InvalidTildeI => {
            out.assert("invalid_set_rejected", completed == 0, format!("{completed} runs completed"))
        }
        (DeviceKind::Honest, ReceiverStrategy::Unbounded) if p.sender == SenderScript::Honest => {
            if p.attack_uses_trapdoors {
                assert_both_learned(&mut out);
            } else {
                let predicted = out.values["predicted_s_other"].as_f64().unwrap_or(0.0);
                let e = out.rate("s_other").clone();
                out.assert("guessing_matches_prediction", e.within_sigma(predicted, 3.0), format!("rate {:.5} vs predicted {predicted:.5} +- 3 sigma", e.rate));
            }
        }
        _ => {}
    }
    Ok(out)
}

#[derive(Serialize)]
struct SelftestRow {
    round: RoundRecord,
    leaked: usize,
}

fn run_selftest(spec: &ExperimentSpec) -> Result<Outcome> {
    let (cfg, p) = (&spec.config, &spec.params);
    let rows = per_trial(spec, |t, tree| {
        let r = run_selftest_round(p.mode, cfg, &p.device, tree, t)?;
        Ok(SelftestRow { round: r.record, leaked: r.leak.records().len() })
    })?;
    let mut out = Outcome { records: rows.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect(), ..Default::default() };
    let count = |f: &dyn Fn(&RoundRecord) -> bool| rows.iter().filter(|r| f(&r.round)).count();
    let passes = count(&|r| r.w == Some(Verdict::Pass));
    let bell = |r: &RoundRecord| r.rt == RoundType::Bell && r.x.is_some() && r.x == r.y;
    let bell_fail = count(&|r| bell(r) && r.w == Some(Verdict::Fail));
    let bell_total = count(&bell);
    out.estimates.insert("pass".into(), Estimate::new(passes as u64, rows.len() as u64));
    out.estimates.insert("bell_matched_fail".into(), Estimate::new(bell_fail as u64, bell_total as u64));
    let combos: std::collections::BTreeSet<String> =
        rows.iter().map(|r| format!("{:?}/{:?}/{:?}/{:?}", r.round.ct_a(), r.round.ct_b(), r.round.theta_a, r.round.theta_b)).collect();
    out.values.insert("combinations_seen".into(), json!(combos.len()));
    match p.device {
        DeviceKind::Honest => out.assert("honest_device_passes", passes == rows.len(), format!("{passes}/{} rounds pass", rows.len())),
        DeviceKind::Classical { strategy: crate::protocols::device::ClassicalStrategy::ImageHonestBellRandom } => {
            let e = out.rate("bell_matched_fail").clone();
            out.assert("bell_failure_is_half", e.trials > 0 && e.within_sigma(0.5, 3.0), format!("rate {:.4} over {} matched Bell rounds", e.rate, e.trials));
        }
        _ => {}
    }
    Ok(out)
}

fn run_estimate_delta(spec: &ExperimentSpec) -> Result<Outcome> {
    let (cfg, p) = (&spec.config, &spec.params);
    let synthetic = p.synthetic_failure.map(|failure_probability| SyntheticGame { failure_probability });
    let game: &dyn SelfTestGame = match &synthetic {
        Some(g) => g,
        None => &p.device,
    };
    let rows = per_trial(spec, |_, tree| estimate_delta(game, cfg.n_estimation, cfg, tree))?;
    let mut out = Outcome { records: rows.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect(), ..Default::default() };
    let mean = rows.iter().map(|r| r.delta_prime).sum::<f64>() / rows.len() as f64;
    let bound = chernoff_confidence(cfg.tau, cfg.n_estimation);
    out.values.insert("delta_prime".into(), json!(mean));
    out.values.insert("confidence_bound".into(), json!(bound));
    if let Some(delta) = p.synthetic_failure {
        let covered = rows.iter().filter(|r| (r.delta_prime - delta).abs() <= cfg.tau).count();
        let e = Estimate::new(covered as u64, rows.len() as u64);
        out.assert("coverage", e.rate >= bound, format!("{covered}/{} estimates within tau = {}, bound {bound:.6}", rows.len(), cfg.tau));
        out.assert("delta_prime_within_tau", (mean - delta).abs() <= cfg.tau, format!("mean {mean:.5} vs delta {delta}"));
        out.estimates.insert("coverage".into(), e);
    } else if p.device == DeviceKind::Honest {
        out.assert("honest_device_never_fails", rows.iter().all(|r| r.failures == 0), format!("mean delta' {mean}"));
    }
    Ok(out)
}

fn run_attack(spec: &ExperimentSpec) -> Result<Outcome> {
    let (cfg, p) = (&spec.config, &spec.params);
    let seed = cfg.seed;
    let mut out = Outcome::default();
    match p.attack {
        AttackKind::UnboundedP1 => {
            let rows = per_trial(spec, |_, tree| p1_attack_trial(cfg, ReceiverStrategy::Unbounded, tree))?;
            out.records = trial_records(&rows);
            out.absorb(&attack_report("unbounded_receiver_p1", seed, cfg, echo(ReceiverStrategy::Unbounded), cfg.n as f64, &rows));
            assert_both_learned(&mut out);
        }
        AttackKind::UnboundedP4 => {
            let opts = unbounded_p4_options(p.attack_uses_trapdoors);
            let rows = per_trial(spec, |_, tree| p4_attack_trial(cfg, &opts, tree))?;
            out.records = trial_records(&rows);
            out.absorb(&attack_report("unbounded_receiver_p4", seed, cfg, echo(&opts), cfg.expected_generation_rounds(), &rows));
            let e = out.rate("s_other").clone();
            if p.attack_uses_trapdoors {
                assert_both_learned(&mut out);
            } else {
                let predicted = out.values["predicted_s_other"].as_f64().unwrap_or(0.0);
                out.assert("guessing_matches_prediction", e.within_sigma(predicted, 3.0), format!("rate {:.5} vs predicted {predicted:.5} +- 3 sigma", e.rate));
            }
        }
        AttackKind::BoundedStorage => {
            let storage = BoundedStorage { capacity: p.capacity, policy: p.policy };
            let cfg = ProtocolConfig { gamma: p.capacity as f64 / cfg.n as f64, ..cfg.clone() };
            let rows = per_trial(spec, |_, tree| p1_attack_trial(&cfg, storage.strategy(), tree))?;
            out.records = trial_records(&rows);
            out.absorb(&attack_report("bounded_receiver_p1", seed, &cfg, echo(storage), cfg.n as f64, &rows));
            if p.capacity == 0 {
                assert_uniform_guess(&mut out, &cfg);
            }
        }
        AttackKind::DeviceRates => {
            let rows = device_rounds_until(cfg, p.device, spec.trials, seed)?;
            out.records = rows.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect();
            out.absorb(&device_rates_report(cfg, p.device, seed, &rows));
            let bell = out.rate("bell_matched_fail").clone();
            match p.device {
                DeviceKind::Honest => out.assert("honest_device_passes", out.rate("fail").successes == 0, format!("{} failures", out.rate("fail").successes)),
                DeviceKind::Classical { strategy: crate::protocols::device::ClassicalStrategy::ImageHonestBellRandom } => {
                    out.assert("bell_failure_is_half", bell.within_sigma(0.5, 3.0), format!("rate {:.4} over {} matched Bell rounds", bell.rate, bell.trials))
                }
                _ => {}
            }
        }
        AttackKind::Abort => {
            let opts = Protocol4Options { device: p.device, ..Default::default() };
            let rows = per_trial(spec, |_, tree| p4_attack_trial(cfg, &opts, tree))?;
            out.records = trial_records(&rows);
            out.absorb(&attack_report("protocol4_abort", seed, cfg, echo(&opts), cfg.expected_generation_rounds(), &rows));
            match p.device {
                DeviceKind::Classical { .. } => assert_classical_detected(&mut out),
                DeviceKind::Honest => assert_no_abort_and_correct(&mut out),
                DeviceKind::Leaky => {}
            }
        }
        AttackKind::ReceiverTv => {
            let rows = per_trial(spec, |_, tree| receiver_security_tv(cfg, p.sender, p.device, tree.key()))?;
            out.records = rows.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect();
            let worst = rows.iter().map(|r| r.tv).fold(0.0, f64::max);
            out.values.insert("max_tv".into(), json!(worst));
            if p.device != DeviceKind::Leaky {
                out.assert("receiver_security_exact", worst == 0.0, format!("max tv {worst} over {} seeds", rows.len()));
            }
        }
        AttackKind::SenderExact => {
            let r = sender_security_exact(cfg.n, cfg.l, p.policy)?;
            out.values.insert("distance".into(), json!(r.distance));
            out.assert("distance_in_range", (0.0..=1.0).contains(&r.distance), format!("distance {}", r.distance));
            out.records = vec![trial_record(0, &r)];
        }
    }
    Ok(out)
}

fn run_bounds_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let seed = spec.config.seed;
    let size = |name: &str| spec.params.instances.unwrap_or_else(|| DEFAULT_SUITE_SIZES.iter().find(|(n, _)| *n == name).map_or(1, |(_, s)| *s));
    let reports: Vec<SuiteReport> = vec![
        chain_rule_suite(size("chain_rule"), seed)?,
        uncertainty_suite(size("uncertainty"), seed)?,
        privacy_amplification_suite(size("privacy_amplification"), seed)?,
        split_suite(size("split"), seed)?,
    ];
    let mut out = Outcome { records: reports.iter().enumerate().map(|(t, r)| trial_record(t, r)).collect(), ..Default::default() };
    for r in &reports {
        out.assert(&format!("{}_no_violations", r.name), r.violations == 0, format!("{} violations in {} instances, worst margin {:e}", r.violations, r.instances, r.worst_margin));
    }
    Ok(out)
}

/// Runs `spec`, writes the report to `spec.output` when set and returns it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let out = match spec.kind {
        ExperimentKind::Ot1 => run_ot1(spec),
        ExperimentKind::Ot4 => run_ot4(spec),
        ExperimentKind::Selftest => run_selftest(spec),
        ExperimentKind::EstimateDelta => run_estimate_delta(spec),
        ExperimentKind::Attack => run_attack(spec),
        ExperimentKind::BoundsCheck => run_bounds_check(spec),
    }?;
    let rounds = out.rounds.unwrap_or(spec.config.n as f64);
    let passed = out.assertions.iter().all(|a| a.passed);
    // destinations are not part of the experiment; reports stay path independent
    let mut resolved = ExperimentSpec { output: None, ..spec.clone() };
    resolved.params.transcripts = None;
    let summary = json!({
        "record": "summary",
        "kind": spec.kind,
        "spec": resolved,
        "seed": spec.config.seed,
        "trials": spec.trials,
        "relations": spec.config.relations(rounds),
        "estimates": out.estimates,
        "values": out.values,
        "assertions": out.assertions,
        "passed": passed,
    });
    let mut lines: Vec<String> = out.records.iter().map(to_line).collect();
    lines.push(to_line(&summary));
    let report = ExperimentReport { lines, summary, assertions: out.assertions };
    if let Some(path) = &spec.output {
        write_report(&report, path)?;
    }
    Ok(report)
}

fn to_line(v: &Value) -> String {
    serde_json::to_string(v).expect("json values serialize")
}

pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.text()).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Recomputes every derived value of a stored transcript.
pub fn replay_transcript(path: &Path) -> Result<ReplayVerdict> {
    replay(&Transcript::read(path)?)
}

/// 0 when every assertion held, 1 on a failed assertion or a replay
/// mismatch, 2 when the experiment could not run.
pub fn exit_code<T>(result: &Result<T>, passed: impl Fn(&T) -> bool) -> i32 {
    match result {
        Ok(v) if passed(v) => 0,
        Ok(_) | Err(Error::ReplayMismatch { .. }) => 1,
        Err(_) => 2,
    }
}

/// Challenge type times the two state bases of a single-verifier round.
pub const SELFTEST_COMBINATIONS: usize = 8;

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, trials: usize) -> ExperimentSpec {
        ExperimentSpec::new(kind, ProtocolConfig { n: 32, l: 2, ..Default::default() }, trials)
    }

    #[test]
    fn honest_ot1_reports_full_success() {
        let r = run_experiment(&small(ExperimentKind::Ot1, 20)).unwrap();
        assert!(r.passed());
        assert_eq!(r.lines.len(), 21);
        assert_eq!(r.summary["values"]["success_rate"], json!(1.0));
        assert_eq!(r.summary["spec"]["config"]["n"], json!(32));
        assert!(r.summary["relations"]["relations"].as_array().unwrap().len() == 2);
    }

    #[test]
    fn reports_are_deterministic() {
        let mut spec = small(ExperimentKind::Ot4, 4);
        spec.config.n = 64;
        let a = run_experiment(&spec).unwrap();
        assert_eq!(a.text(), run_experiment(&spec).unwrap().text());
        spec.config.seed = 1;
        assert_ne!(a.text(), run_experiment(&spec).unwrap().text());
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        let r = run_experiment(&small(ExperimentKind::Ot1, 0));
        assert_eq!(exit_code(&r, ExperimentReport::passed), 2);
        let mut spec = small(ExperimentKind::Ot1, 1);
        spec.config.diagnostics = true;
        spec.config.gamma = 0.5;
        match run_experiment(&spec) {
            Err(Error::Config(msg)) => assert!(msg.contains("gamma n <="), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"kind":"ot1","bogus":1}"#).is_err());
    }

    #[test]
    fn delta_estimation_covers() {
        let mut spec = small(ExperimentKind::EstimateDelta, 30);
        spec.params.synthetic_failure = Some(0.2);
        let r = run_experiment(&spec).unwrap();
        assert!(r.passed(), "{:?}", r.assertions);
        assert!((r.summary["values"]["delta_prime"].as_f64().unwrap() - 0.2).abs() < 0.05);
    }

    #[test]
    fn attacks_and_bounds_pass() {
        let mut spec = small(ExperimentKind::Attack, 10);
        assert!(run_experiment(&spec).unwrap().passed());
        spec.params.attack = AttackKind::ReceiverTv;
        spec.config.n = 6;
        spec.trials = 2;
        assert!(run_experiment(&spec).unwrap().passed());
        let mut bounds = small(ExperimentKind::BoundsCheck, 1);
        bounds.params.instances = Some(6);
        let r = run_experiment(&bounds).unwrap();
        assert!(r.passed(), "{:?}", r.assertions);
        assert_eq!(r.assertions.len(), 4);
    }

    #[test]
    fn transcripts_replay() {
        let dir = std::env::temp_dir().join(format!("harness-replay-{}", std::process::id()));
        let mut spec = small(ExperimentKind::Ot4, 2);
        spec.config.n = 64;
        spec.params.transcripts = Some(dir.clone());
        run_experiment(&spec).unwrap();
        let v = replay_transcript(&dir.join("trial-000001.json")).unwrap();
        assert!(v.checked.len() > 3);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn selftest_counts_combinations() {
        let r = run_experiment(&small(ExperimentKind::Selftest, 200)).unwrap();
        assert!(r.passed());
        assert_eq!(r.summary["values"]["combinations_seen"], json!(SELFTEST_COMBINATIONS));
    }
}
