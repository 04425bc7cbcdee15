//! Self-test rounds with two verifiers or with one verifier and a relay, and
//! the failure-rate estimate built on them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check::classify;
use super::config::chernoff_confidence;
use super::device::{Ctx, DeviceKind, LeakLog, Link, Reply};
use super::transcript::{Body, Party, Transcript};
use super::{winning_check, ProtocolConfig, RoundRecord, Verdict};
use crate::entcf::{keygen, ChallengeType, KeyRegistry};
use crate::error::Result;
use crate::qsim::{Basis, Lab, Side};
use crate::rng::{label, SeedTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfTestMode {
    TwoVerifier,
    SingleVerifier,
}

/// One executed round with the keys needed to check it.
#[derive(Debug)]
pub struct SelfTestRound {
    pub record: RoundRecord,
    pub keys: KeyRegistry,
    pub messages: Vec<super::transcript::Message>,
    pub leak: LeakLog,
}

fn reply_fields(reply: Reply) -> (Option<crate::bits::BitString>, Option<crate::bits::BitString>, Body) {
    match reply {
        Reply::Preimage { z } => (Some(z.clone()), None, Body::Preimage { z }),
        Reply::Equation { d } => (None, Some(d.clone()), Body::Equation { d }),
    }
}

/// Runs one round. Alice's choices come from the `VERIFIER` stream; in
/// two-verifier mode Bob's come from the `RECEIVER` stream, otherwise Alice
/// makes them and Bob relays.
pub fn run_selftest_round(mode: SelfTestMode, cfg: &ProtocolConfig, device: &DeviceKind, tree: SeedTree, index: usize) -> Result<SelfTestRound> {
    let m = cfg.domain_bits;
    let mut alice = tree.child(label::VERIFIER).rng();
    let mut bob = tree.child(label::RECEIVER).rng();
    let mut keys = KeyRegistry::new();
    let mut log = Transcript::new(super::transcript::ProtocolKind::Ot4, cfg.clone(), serde_json::Value::Null);

    let theta_a = Basis::from_bit(alice.random_range(0..2));
    let theta_b = match mode {
        SelfTestMode::SingleVerifier => Basis::from_bit(alice.random_range(0..2)),
        SelfTestMode::TwoVerifier => Basis::from_bit(bob.random_range(0..2)),
    };
    let pair_a = keygen(theta_a, m, &mut alice)?;
    let pair_b = match mode {
        SelfTestMode::SingleVerifier => keygen(theta_b, m, &mut alice)?,
        SelfTestMode::TwoVerifier => keygen(theta_b, m, &mut bob)?,
    };
    keys.insert(pair_a.trapdoor.clone());
    keys.insert(pair_b.trapdoor.clone());
    let r = Some(index);
    if mode == SelfTestMode::SingleVerifier {
        log.send(1, Party::Sender, Party::Receiver, r, Body::Key { key_id: pair_b.key.id(), domain_bits: m });
    }
    log.send(1, Party::Sender, Party::ComponentA, r, Body::Key { key_id: pair_a.key.id(), domain_bits: m });
    log.send(1, Party::Receiver, Party::ComponentB, r, Body::Key { key_id: pair_b.key.id(), domain_bits: m });

    let mut lab = Lab::new();
    let mut link = Link::new(tree.child(label::SOURCE).key());
    let mut leak = LeakLog::default();
    let mut rng_a = tree.child(label::DEVICE_A).rng();
    let mut rng_b = tree.child(label::DEVICE_B).rng();
    let mut comp_a = device.component(Side::Sender);
    let mut comp_b = device.component(Side::Receiver);
    macro_rules! ctx {
        ($side:expr, $rng:expr) => {
            &mut Ctx { round: index, side: $side, lab: &mut lab, link: &mut link, leak: &mut leak, rng: $rng }
        };
    }

    let c_a = comp_a.commit(&pair_a.key, ctx!(Side::Sender, &mut rng_a))?;
    let c_b = comp_b.commit(&pair_b.key, ctx!(Side::Receiver, &mut rng_b))?;
    log.send(2, Party::ComponentA, Party::Sender, r, Body::Commitment { c: c_a.clone() });
    log.send(2, Party::ComponentB, Party::Receiver, r, Body::Commitment { c: c_b.clone() });

    let ct_a = ChallengeType::from_bit(alice.random_range(0..2));
    let ct_b = match mode {
        SelfTestMode::SingleVerifier => {
            log.send(3, Party::Sender, Party::Receiver, r, Body::Challenge { ct: ct_a });
            ct_a
        }
        SelfTestMode::TwoVerifier => ChallengeType::from_bit(bob.random_range(0..2)),
    };
    log.send(3, Party::Sender, Party::ComponentA, r, Body::Challenge { ct: ct_a });
    log.send(3, Party::Receiver, Party::ComponentB, r, Body::Challenge { ct: ct_b });
    let (z_a, d_a, body_a) = reply_fields(comp_a.challenge(ct_a, ctx!(Side::Sender, &mut rng_a))?);
    let (z_b, d_b, body_b) = reply_fields(comp_b.challenge(ct_b, ctx!(Side::Receiver, &mut rng_b))?);
    log.send(4, Party::ComponentA, Party::Sender, r, body_a);
    log.send(4, Party::ComponentB, Party::Receiver, r, body_b);

    let mut x = None;
    let mut y = None;
    if ct_a == ChallengeType::B {
        x = Some(Basis::from_bit(alice.random_range(0..2)));
    }
    if ct_b == ChallengeType::B {
        let source = if mode == SelfTestMode::SingleVerifier { &mut alice } else { &mut bob };
        y = Some(Basis::from_bit(source.random_range(0..2)));
        if mode == SelfTestMode::SingleVerifier {
            log.send(5, Party::Sender, Party::Receiver, r, Body::Question { basis: y.expect("set") });
        }
    }
    let (mut a_bit, mut h_a, mut b_bit, mut h_b) = (None, None, None, None);
    if let Some(basis) = x {
        log.send(5, Party::Sender, Party::ComponentA, r, Body::Question { basis });
        let (bit, h) = comp_a.answer(basis, ctx!(Side::Sender, &mut rng_a))?;
        log.send(5, Party::ComponentA, Party::Sender, r, Body::Answer { bit, h });
        a_bit = Some(bit);
        h_a = Some(h);
    }
    if let Some(basis) = y {
        log.send(5, Party::Receiver, Party::ComponentB, r, Body::Question { basis });
        let (bit, h) = comp_b.answer(basis, ctx!(Side::Receiver, &mut rng_b))?;
        log.send(5, Party::ComponentB, Party::Receiver, r, Body::Answer { bit, h });
        b_bit = Some(bit);
        h_b = Some(h);
    }
    link.release(&mut lab, Side::Sender)?;
    link.release(&mut lab, Side::Receiver)?;

    let mut record = RoundRecord {
        index,
        theta_a,
        theta_b,
        key_a: pair_a.key.id(),
        key_b: pair_b.key.id(),
        c_a,
        c_b,
        ct: ct_a,
        ct_b: (ct_b != ct_a).then_some(ct_b),
        z_a,
        z_b,
        d_a,
        d_b,
        x,
        y,
        a_bit,
        b_bit,
        h_a,
        h_b,
        rt: classify(ct_a, ct_b, theta_a, theta_b),
        t: None,
        in_i: false,
        w: None,
    };
    record.w = Some(winning_check(&record, &keys)?);
    Ok(SelfTestRound { record, keys, messages: log.messages, leak })
}

/// Anything that plays single-verifier rounds and reports pass or fail.
pub trait SelfTestGame: Sync {
    fn play(&self, cfg: &ProtocolConfig, tree: SeedTree, index: usize) -> Result<Verdict>;
}

impl SelfTestGame for DeviceKind {
    fn play(&self, cfg: &ProtocolConfig, tree: SeedTree, index: usize) -> Result<Verdict> {
        let round = run_selftest_round(SelfTestMode::SingleVerifier, cfg, self, tree, index)?;
        Ok(round.record.w.expect("checked"))
    }
}

/// A device abstraction that fails each round independently with a known probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGame {
    pub failure_probability: f64,
}

impl SelfTestGame for SyntheticGame {
    fn play(&self, _cfg: &ProtocolConfig, tree: SeedTree, _index: usize) -> Result<Verdict> {
        let fail = tree.rng().random_bool(self.failure_probability.clamp(0.0, 1.0));
        Ok(if fail { Verdict::Fail } else { Verdict::Pass })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub rounds: usize,
    pub failures: usize,
    /// `F / N`.
    pub delta_prime: f64,
    pub tau: f64,
    /// `1 - 2 exp(-tau^2 N / 3)`.
    pub confidence: f64,
}

/// Plays `rounds` independent rounds, round `i` on stream `(ESTIMATION, i)`.
pub fn estimate_delta(game: &dyn SelfTestGame, rounds: usize, cfg: &ProtocolConfig, tree: SeedTree) -> Result<DeltaEstimate> {
    if rounds == 0 {
        return Err(crate::error::Error::Config("estimation needs at least one round".into()));
    }
    let verdicts = (0..rounds)
        .into_par_iter()
        .map(|i| game.play(cfg, tree.path(&[label::ESTIMATION, i as u64]), i))
        .collect::<Result<Vec<Verdict>>>()?;
    let failures = verdicts.iter().filter(|v| **v == Verdict::Fail).count();
    Ok(DeltaEstimate {
        rounds,
        failures,
        delta_prime: failures as f64 / rounds as f64,
        tau: cfg.tau,
        confidence: chernoff_confidence(cfg.tau, rounds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::RoundType;

    #[test]
    fn single_verifier_honest_rounds_pass() {
        let cfg = ProtocolConfig::default();
        for i in 0..60 {
            let round = run_selftest_round(SelfTestMode::SingleVerifier, &cfg, &DeviceKind::Honest, SeedTree::new(3).child(i), i as usize).unwrap();
            assert_eq!(round.record.w, Some(Verdict::Pass));
            assert!(round.leak.is_empty());
            assert_eq!(round.record.ct_b, None);
        }
    }

    #[test]
    fn two_verifier_mixed_challenge_types() {
        let cfg = ProtocolConfig::default();
        let mut mixed = 0;
        for i in 0..200 {
            let round = run_selftest_round(SelfTestMode::TwoVerifier, &cfg, &DeviceKind::Honest, SeedTree::new(4).child(i), i as usize).unwrap();
            let rec = &round.record;
            if rec.ct_a() != rec.ct_b() {
                mixed += 1;
                assert_eq!(rec.rt, RoundType::Product);
                assert_eq!(rec.x.is_some(), rec.ct_a() == ChallengeType::B);
                assert_eq!(rec.y.is_some(), rec.ct_b() == ChallengeType::B);
            }
            assert_eq!(rec.w, Some(Verdict::Pass), "{rec:?}");
        }
        assert!(mixed > 50);
    }

    #[test]
    fn device_messages_carry_no_family() {
        let cfg = ProtocolConfig::default();
        let round = run_selftest_round(SelfTestMode::SingleVerifier, &cfg, &DeviceKind::Honest, SeedTree::new(5), 0).unwrap();
        for m in round.messages.iter().filter(|m| matches!(m.payload.to, Party::ComponentA | Party::ComponentB)) {
            let text = serde_json::to_string(m).unwrap();
            assert!(!text.contains("claw") && !text.contains("injective") && !text.contains("theta") && !text.contains("trapdoor"), "{text}");
        }
    }

    #[test]
    fn estimates_for_extreme_games() {
        let cfg = ProtocolConfig::default();
        let honest = estimate_delta(&DeviceKind::Honest, 200, &cfg, SeedTree::new(6)).unwrap();
        assert_eq!(honest.delta_prime, 0.0);
        let broken = estimate_delta(&SyntheticGame { failure_probability: 1.0 }, 50, &cfg, SeedTree::new(6)).unwrap();
        assert_eq!(broken.delta_prime, 1.0);
        assert!(estimate_delta(&DeviceKind::Honest, 0, &cfg, SeedTree::new(6)).is_err());
    }
}
