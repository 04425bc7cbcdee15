//! Device-independent Rand 1-2 OT: `n` single-verifier self-test rounds with
//! the receiver's basis override, a test on the published rounds, then
//! Bell-pair OT on the overridden generation rounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check::classify;
use super::device::{Ctx, DeviceComponent, DeviceKind, LeakLog, Link, Reply};
use super::ot1::{policy_basis, ReceiverStrategy};
use super::transcript::{Body, Party, ProtocolKind, TestData, Transcript};
use super::{
    compute_corrections, hash_selection, winning_check, IndexSets, OtOutcome, ProtocolConfig, RoundRecord, RoundTag, RoundType, Verdict,
};
use crate::bits::BitString;
use crate::entcf::{keygen, ChallengeType, EntcfKeyPair, KeyRegistry, Trapdoor};
use crate::error::{Error, Result};
use crate::hashing::sample_hash;
use crate::qsim::{Basis, Lab, Side};
use crate::rng::{label, SeedTree, StreamRng};

/// Message policy of the OT sender.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenderScript {
    Honest,
    /// Challenge type b in every round.
    AlwaysCtB,
    /// State bases cycle through all four family combinations by round
    /// index; questions are fixed to `x = Hadamard`, `y = Computational`.
    AdversarialKeys,
    /// Publishes every generation round as the generation set, ignoring `I`.
    InvalidTildeI,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol4Options {
    pub sender: SenderScript,
    pub receiver: ReceiverStrategy,
    pub device: DeviceKind,
    /// Whether a dishonest receiver uses the published trapdoors for its corrections.
    pub attack_uses_trapdoors: bool,
    pub forced_choice: Option<u8>,
    /// Override coins of the challenge-type-b rounds, in round order.
    pub forced_overrides: Option<Vec<bool>>,
}

impl Default for Protocol4Options {
    fn default() -> Self {
        Self {
            sender: SenderScript::Honest,
            receiver: ReceiverStrategy::Honest,
            device: DeviceKind::Honest,
            attack_uses_trapdoors: true,
            forced_choice: None,
            forced_overrides: None,
        }
    }
}

#[derive(Debug)]
pub struct Protocol4Run {
    pub outcome: OtOutcome,
    pub transcript: Transcript,
    pub guesses: Option<[BitString; 2]>,
    /// Full per-round data, including what each party kept private.
    pub records: Vec<RoundRecord>,
    pub tested: usize,
    pub failed: usize,
    pub leak: LeakLog,
    /// Number of challenge-type-b rounds, i.e. override coins consumed.
    pub override_rounds: usize,
    /// Generation rounds whose receiver correction had to be guessed.
    pub guessed_corrections: usize,
    /// Generation rounds measured in the announced basis by a dishonest receiver.
    pub stored_rounds: usize,
}

struct Round {
    theta_a: Basis,
    theta_b: Basis,
    pair_a: EntcfKeyPair,
    pair_b: EntcfKeyPair,
    ct: ChallengeType,
    x: Option<Basis>,
    y: Option<Basis>,
    c_a: BitString,
    c_b: BitString,
    z_a: Option<BitString>,
    z_b: Option<BitString>,
    d_a: Option<BitString>,
    d_b: Option<BitString>,
    a: Option<u8>,
    h_a: Option<u8>,
    in_i: bool,
    y_used: Option<Basis>,
    b: Option<u8>,
    h_b: Option<u8>,
    link: Link,
    comp_b: Box<dyn DeviceComponent>,
    rng_b: StreamRng,
    tag: RoundTag,
    verdict: Option<Verdict>,
}

impl Round {
    fn record(&self, index: usize, y: Option<Basis>, b: Option<u8>, h_b: Option<u8>) -> RoundRecord {
        RoundRecord {
            index,
            theta_a: self.theta_a,
            theta_b: self.theta_b,
            key_a: self.pair_a.key.id(),
            key_b: self.pair_b.key.id(),
            c_a: self.c_a.clone(),
            c_b: self.c_b.clone(),
            ct: self.ct,
            ct_b: None,
            z_a: self.z_a.clone(),
            z_b: self.z_b.clone(),
            d_a: self.d_a.clone(),
            d_b: self.d_b.clone(),
            x: self.x,
            y,
            a_bit: self.a,
            b_bit: b,
            h_a: self.h_a,
            h_b,
            rt: classify(self.ct, self.ct, self.theta_a, self.theta_b),
            t: Some(self.tag),
            in_i: self.in_i,
            w: self.verdict,
        }
    }
}

/// Stream of party `who` for round `i`; child 0 is the party's run-level stream.
fn round_stream(tree: SeedTree, who: u64, i: usize) -> StreamRng {
    tree.path(&[who, i as u64 + 1]).rng()
}

fn run_stream(tree: SeedTree, who: u64) -> StreamRng {
    tree.path(&[who, 0]).rng()
}

struct Run {
    t: Transcript,
    lab: Lab,
    leak: LeakLog,
    rounds: Vec<Round>,
    registry: KeyRegistry,
}

impl Run {
    fn answer_b(&mut self, i: usize, basis: Basis) -> Result<()> {
        let round = &mut self.rounds[i];
        if round.b.is_some() {
            return Ok(());
        }
        let mut ctx = Ctx { round: i, side: Side::Receiver, lab: &mut self.lab, link: &mut round.link, leak: &mut self.leak, rng: &mut round.rng_b };
        let (bit, h) = round.comp_b.answer(basis, &mut ctx)?;
        round.y_used = Some(basis);
        round.b = Some(bit);
        round.h_b = Some(h);
        self.t.send(1, Party::Receiver, Party::ComponentB, Some(i), Body::Question { basis });
        self.t.send(1, Party::ComponentB, Party::Receiver, Some(i), Body::Answer { bit, h });
        Ok(())
    }

    fn abort(mut self, step: u8, by: Party, to: Party, reason: String, c: u8, sets: IndexSets, tested: usize, failed: usize, override_rounds: usize) -> Protocol4Run {
        self.t.send(step, by, to, None, Body::Abort { reason });
        let outcome = OtOutcome { aborted: true, s0: None, s1: None, receiver_output: None, choice_bit: c, index_sets: sets };
        self.t.outcome = Some(outcome.clone());
        let records = self.rounds.iter().enumerate().map(|(i, r)| r.record(i, r.y_used, r.b, r.h_b)).collect();
        Protocol4Run {
            outcome,
            transcript: self.t,
            guesses: None,
            records,
            tested,
            failed,
            leak: self.leak,
            override_rounds,
            guessed_corrections: 0,
            stored_rounds: 0,
        }
    }
}

pub fn run_protocol4(cfg: &ProtocolConfig, opts: &Protocol4Options, tree: SeedTree) -> Result<Protocol4Run> {
    cfg.validate()?;
    let n = cfg.n;
    let m = cfg.domain_bits;
    let honest_receiver = opts.receiver.is_honest();
    let mut sender_run = run_stream(tree, label::SENDER);
    let mut receiver_run = run_stream(tree, label::RECEIVER);
    let c = opts.forced_choice.unwrap_or_else(|| receiver_run.random_range(0..2)) & 1;
    let mut run = Run {
        t: Transcript::new(ProtocolKind::Ot4, cfg.clone(), serde_json::to_value(opts).expect("plain data")),
        lab: Lab::new(),
        leak: LeakLog::default(),
        rounds: Vec::with_capacity(n),
        registry: KeyRegistry::new(),
    };

    // Step 1: self-test rounds with the receiver's override
    let mut override_rounds = 0;
    for i in 0..n {
        let r = Some(i);
        let mut srng = round_stream(tree, label::SENDER, i);
        let mut rrng = round_stream(tree, label::RECEIVER, i);
        let mut rng_a = round_stream(tree, label::DEVICE_A, i);
        let rng_b = round_stream(tree, label::DEVICE_B, i);
        let draws: [u8; 5] = std::array::from_fn(|_| srng.random_range(0..2));
        let (theta_a, theta_b, ct, x, y) = match opts.sender {
            SenderScript::AdversarialKeys => {
                (Basis::from_bit((i % 2) as u8), Basis::from_bit(((i / 2) % 2) as u8), ChallengeType::from_bit(draws[2]), Basis::Hadamard, Basis::Computational)
            }
            script => {
                let ct = if script == SenderScript::AlwaysCtB { ChallengeType::B } else { ChallengeType::from_bit(draws[2]) };
                (Basis::from_bit(draws[0]), Basis::from_bit(draws[1]), ct, Basis::from_bit(draws[3]), Basis::from_bit(draws[4]))
            }
        };
        let pair_a = keygen(theta_a, m, &mut srng)?;
        let pair_b = keygen(theta_b, m, &mut srng)?;
        run.registry.insert(pair_a.trapdoor.clone());
        run.registry.insert(pair_b.trapdoor.clone());
        run.t.send(1, Party::Sender, Party::ComponentA, r, Body::Key { key_id: pair_a.key.id(), domain_bits: m });
        run.t.send(1, Party::Sender, Party::Receiver, r, Body::Key { key_id: pair_b.key.id(), domain_bits: m });
        run.t.send(1, Party::Receiver, Party::ComponentB, r, Body::Key { key_id: pair_b.key.id(), domain_bits: m });

        let mut link = Link::new(tree.path(&[label::SOURCE, i as u64 + 1]).key());
        let mut comp_a = opts.device.component(Side::Sender);
        let comp_b = opts.device.component(Side::Receiver);
        let mut round = Round {
            theta_a,
            theta_b,
            c_a: BitString::zeros(0),
            c_b: BitString::zeros(0),
            pair_a,
            pair_b,
            ct,
            x: None,
            y: None,
            z_a: None,
            z_b: None,
            d_a: None,
            d_b: None,
            a: None,
            h_a: None,
            in_i: false,
            y_used: None,
            b: None,
            h_b: None,
            link: Link::new(0),
            comp_b,
            rng_b,
            tag: RoundTag::Test,
            verdict: None,
        };
        {
            let lab = &mut run.lab;
            let leak = &mut run.leak;
            let mut ctx_a = Ctx { round: i, side: Side::Sender, lab, link: &mut link, leak, rng: &mut rng_a };
            round.c_a = comp_a.commit(&round.pair_a.key, &mut ctx_a)?;
        }
        {
            let mut ctx_b = Ctx { round: i, side: Side::Receiver, lab: &mut run.lab, link: &mut link, leak: &mut run.leak, rng: &mut round.rng_b };
            round.c_b = round.comp_b.commit(&round.pair_b.key, &mut ctx_b)?;
        }
        run.t.send(1, Party::ComponentA, Party::Sender, r, Body::Commitment { c: round.c_a.clone() });
        run.t.send(1, Party::ComponentB, Party::Receiver, r, Body::Commitment { c: round.c_b.clone() });

        run.t.send(1, Party::Sender, Party::Receiver, r, Body::Challenge { ct });
        run.t.send(1, Party::Sender, Party::ComponentA, r, Body::Challenge { ct });
        run.t.send(1, Party::Receiver, Party::ComponentB, r, Body::Challenge { ct });
        let reply_a = comp_a.challenge(ct, &mut Ctx { round: i, side: Side::Sender, lab: &mut run.lab, link: &mut link, leak: &mut run.leak, rng: &mut rng_a })?;
        let reply_b = round.comp_b.challenge(ct, &mut Ctx { round: i, side: Side::Receiver, lab: &mut run.lab, link: &mut link, leak: &mut run.leak, rng: &mut round.rng_b })?;
        for (from, to, reply) in [(Party::ComponentA, Party::Sender, reply_a), (Party::ComponentB, Party::Receiver, reply_b)] {
            let (z, d, body) = match reply {
                Reply::Preimage { z } => (Some(z.clone()), None, Body::Preimage { z }),
                Reply::Equation { d } => (None, Some(d.clone()), Body::Equation { d }),
            };
            if from == Party::ComponentA {
                round.z_a = z;
                round.d_a = d;
            } else {
                round.z_b = z;
                round.d_b = d;
            }
            run.t.send(1, from, to, r, body);
        }

        if ct == ChallengeType::B {
            round.x = Some(x);
            round.y = Some(y);
            run.t.send(1, Party::Sender, Party::Receiver, r, Body::Question { basis: y });
            run.t.send(1, Party::Sender, Party::ComponentA, r, Body::Question { basis: x });
            let (bit, h) = comp_a.answer(x, &mut Ctx { round: i, side: Side::Sender, lab: &mut run.lab, link: &mut link, leak: &mut run.leak, rng: &mut rng_a })?;
            round.a = Some(bit);
            round.h_a = Some(h);
            run.t.send(1, Party::ComponentA, Party::Sender, r, Body::Answer { bit, h });

            let coin = match &opts.forced_overrides {
                Some(coins) => *coins.get(override_rounds).ok_or_else(|| Error::Config(format!("only {} forced override coins", coins.len())))?,
                None => rrng.random_bool(cfg.override_probability),
            };
            override_rounds += 1;
            round.in_i = coin;
            let basis = if coin { Basis::from_bit(c) } else { y };
            round.link = link;
            run.rounds.push(round);
            if honest_receiver {
                run.answer_b(i, basis)?;
            } else {
                // keep the component's state for later, as one unmeasured qubit
                let round = run.rounds.last_mut().expect("pushed");
                round.y_used = Some(basis);
                let mut ctx = Ctx { round: i, side: Side::Receiver, lab: &mut run.lab, link: &mut round.link, leak: &mut run.leak, rng: &mut round.rng_b };
                round.comp_b.precompute(&mut ctx)?;
            }
            let round = run.rounds.last().expect("pushed");
            run.t.record(1, Party::Receiver, r, Body::ReceiverRound { overridden: coin, y: round.y_used });
        } else {
            round.link = link;
            run.rounds.push(round);
            run.t.record(1, Party::Receiver, r, Body::ReceiverRound { overridden: false, y: None });
        }
        let round = run.rounds.last().expect("pushed");
        run.t.record(
            1,
            Party::Sender,
            r,
            Body::SenderRound {
                theta_a: round.theta_a,
                theta_b: round.theta_b,
                trapdoor_a: round.pair_a.trapdoor.to_hex(),
                trapdoor_b: round.pair_b.trapdoor.to_hex(),
                ct: round.ct,
                x: round.x,
                y: round.y,
            },
        );
    }

    // Step 2: round types
    let types: Vec<RoundType> = run.rounds.iter().map(|r| classify(r.ct, r.ct, r.theta_a, r.theta_b)).collect();
    run.t.record(2, Party::Sender, None, Body::RoundTypes { types: types.clone() });

    // Step 3: test or generate
    for (round, rt) in run.rounds.iter_mut().zip(&types) {
        round.tag = if *rt == RoundType::Bell && sender_run.random_bool(0.5) { RoundTag::Generate } else { RoundTag::Test };
    }
    let tags: Vec<RoundTag> = run.rounds.iter().map(|r| r.tag).collect();
    run.t.send(3, Party::Sender, Party::Receiver, None, Body::Tags { tags: tags.clone() });

    // Step 4: the receiver publishes I and its test data outside I
    let i_set: Vec<usize> = (0..n).filter(|&i| run.rounds[i].in_i).collect();
    run.t.send(4, Party::Receiver, Party::Sender, None, Body::IndexSet { indices: i_set.clone() });
    let published: Vec<usize> = (0..n).filter(|&i| tags[i] == RoundTag::Test && !run.rounds[i].in_i).collect();
    for &i in &published {
        if run.rounds[i].ct == ChallengeType::B {
            let y = run.rounds[i].y.expect("set for b");
            run.answer_b(i, y)?;
        }
        let round = &run.rounds[i];
        let data = TestData { c: round.c_b.clone(), z: round.z_b.clone(), d: round.d_b.clone(), b: round.b, h: round.h_b };
        run.t.send(4, Party::Receiver, Party::Sender, Some(i), Body::Test { data });
    }
    let mut verdicts = Vec::with_capacity(published.len());
    for &i in &published {
        let round = &run.rounds[i];
        let rec = round.record(i, round.y, round.b, round.h_b);
        let v = winning_check(&rec, &run.registry)?;
        run.rounds[i].verdict = Some(v);
        verdicts.push((i, v));
    }

    // Step 5: abort test, strictly greater than the threshold
    let tested = verdicts.len();
    let failed = verdicts.iter().filter(|(_, v)| *v == Verdict::Fail).count();
    let fraction = if tested == 0 { 0.0 } else { failed as f64 / tested as f64 };
    let abort = fraction > cfg.threshold;
    run.t.record(5, Party::Sender, None, Body::Verdicts { verdicts, tested, failed, fraction, threshold: cfg.threshold, abort });
    let mut sets = IndexSets { i: i_set.clone(), ..Default::default() };
    if abort {
        let reason = format!("failed-test fraction {fraction:.4} exceeds threshold {}", cfg.threshold);
        return Ok(run.abort(5, Party::Sender, Party::Receiver, reason, c, sets, tested, failed, override_rounds));
    }

    // Step 6: generation set and the receiver-side trapdoors
    let tilde_i: Vec<usize> = match opts.sender {
        SenderScript::InvalidTildeI => (0..n).filter(|&i| tags[i] == RoundTag::Generate).collect(),
        _ => i_set.iter().copied().filter(|&i| tags[i] == RoundTag::Generate).collect(),
    };
    let trapdoors: Vec<String> = tilde_i.iter().map(|&i| run.rounds[i].pair_b.trapdoor.to_hex()).collect();
    run.t.send(6, Party::Sender, Party::Receiver, None, Body::TildeI { indices: tilde_i.clone(), trapdoors: trapdoors.clone() });
    sets.tilde_i = tilde_i.clone();
    let published_trapdoors = match validate_tilde_i(&run.rounds, &tilde_i, &trapdoors) {
        Ok(t) => t,
        Err(reason) => return Ok(run.abort(6, Party::Receiver, Party::Sender, reason, c, sets, tested, failed, override_rounds)),
    };
    let x_t: Vec<Basis> = tilde_i.iter().map(|&i| run.rounds[i].x.expect("b round")).collect();
    let pos: Vec<usize> = (0..tilde_i.len()).collect();
    let (pos0, pos1) = super::split_by_basis(&pos, &x_t);
    sets.tilde_i_0 = pos0.iter().map(|&p| tilde_i[p]).collect();
    sets.tilde_i_1 = pos1.iter().map(|&p| tilde_i[p]).collect();

    // Step 7: corrections
    let mut w_alpha = Vec::with_capacity(tilde_i.len());
    for &i in &tilde_i {
        let round = &run.rounds[i];
        let rec = round.record(i, round.y_used, round.b, round.h_b);
        w_alpha.push(compute_corrections(&rec, Side::Sender, &round.pair_a.trapdoor)?);
    }
    let w_alpha = BitString::from_u8s(&w_alpha);
    run.t.record(7, Party::Sender, None, Body::Corrections { w: w_alpha.clone() });

    // Step 8: storage checkpoint, then the announcement
    let kept = opts.receiver.kept(tilde_i.len());
    if !honest_receiver {
        let policy = opts.receiver.policy();
        let stored: Vec<usize> = tilde_i.iter().copied().take(kept).collect();
        for i in 0..n {
            if run.rounds[i].ct == ChallengeType::B && run.rounds[i].b.is_none() && !stored.contains(&i) {
                let basis = if tilde_i.contains(&i) { policy_basis(policy, c, &mut receiver_run) } else { run.rounds[i].y_used.expect("b round") };
                run.answer_b(i, basis)?;
            }
        }
    }
    let capacity = if honest_receiver { cfg.capacity(tilde_i.len()) } else { kept };
    run.lab.checkpoint(Side::Receiver, capacity)?;
    let f0 = sample_hash(n, cfg.l, &mut sender_run)?;
    let f1 = sample_hash(n, cfg.l, &mut sender_run)?;
    run.t.send(8, Party::Sender, Party::Receiver, None, Body::Announce { x: x_t.clone(), f0: f0.clone(), f1: f1.clone() });
    let a_t = BitString::from_u8s(&tilde_i.iter().map(|&i| run.rounds[i].a.expect("b round")).collect::<Vec<u8>>());
    let s0 = hash_selection(&f0, &a_t, &w_alpha, &pos0)?;
    let s1 = hash_selection(&f1, &a_t, &w_alpha, &pos1)?;
    run.t.record(8, Party::Sender, None, Body::SenderOutput { s0: s0.clone(), s1: s1.clone() });

    // Step 9: receiver output
    let mut guessed_corrections = 0;
    let mut stored_rounds = 0;
    for (p, &i) in tilde_i.iter().enumerate() {
        if run.rounds[i].b.is_none() {
            stored_rounds += 1;
            run.answer_b(i, x_t[p])?;
        }
    }
    let mut w_beta = Vec::with_capacity(tilde_i.len());
    for (p, &i) in tilde_i.iter().enumerate() {
        let round = &run.rounds[i];
        let rec = round.record(i, round.y_used, round.b, round.h_b);
        let needs_trapdoor = round.y_used == Some(Basis::Computational);
        let w = if honest_receiver || opts.attack_uses_trapdoors || !needs_trapdoor {
            compute_corrections(&rec, Side::Receiver, &published_trapdoors[p])?
        } else {
            guessed_corrections += 1;
            receiver_run.random_range(0..2)
        };
        w_beta.push(w);
    }
    let w_beta = BitString::from_u8s(&w_beta);
    run.t.record(7, Party::Receiver, None, Body::Corrections { w: w_beta.clone() });
    let b_t = BitString::from_u8s(&tilde_i.iter().map(|&i| run.rounds[i].b.expect("answered")).collect::<Vec<u8>>());
    let choice = opts.receiver.effective_choice(c);
    let (guesses, output) = if honest_receiver {
        let (f, set) = if c == 0 { (&f0, &pos0) } else { (&f1, &pos1) };
        (None, hash_selection(f, &b_t, &w_beta, set)?)
    } else {
        let g0 = hash_selection(&f0, &b_t, &w_beta, &pos0)?;
        let g1 = hash_selection(&f1, &b_t, &w_beta, &pos1)?;
        run.t.record(9, Party::Receiver, None, Body::Guesses { s0: g0.clone(), s1: g1.clone() });
        let out = if choice == 0 { g0.clone() } else { g1.clone() };
        (Some([g0, g1]), out)
    };
    run.t.record(9, Party::Receiver, None, Body::ReceiverOutput { c: choice, y: output.clone() });

    let outcome = OtOutcome { aborted: false, s0: Some(s0), s1: Some(s1), receiver_output: Some(output), choice_bit: choice, index_sets: sets };
    run.t.outcome = Some(outcome.clone());
    let records = run.rounds.iter().enumerate().map(|(i, r)| r.record(i, r.y_used, r.b, r.h_b)).collect();
    Ok(Protocol4Run {
        outcome,
        transcript: run.t,
        guesses,
        records,
        tested,
        failed,
        leak: run.leak,
        override_rounds,
        guessed_corrections,
        stored_rounds,
    })
}

/// Receiver-side checks on the published generation set.
fn validate_tilde_i(rounds: &[Round], tilde_i: &[usize], trapdoors: &[String]) -> std::result::Result<Vec<Trapdoor>, String> {
    if tilde_i.len() != trapdoors.len() {
        return Err("one trapdoor per generation round is required".into());
    }
    if tilde_i.windows(2).any(|w| w[0] >= w[1]) {
        return Err("generation set is not strictly increasing".into());
    }
    let mut out = Vec::with_capacity(tilde_i.len());
    for (&i, hex) in tilde_i.iter().zip(trapdoors) {
        let round = rounds.get(i).ok_or_else(|| format!("round {i} does not exist"))?;
        if !round.in_i {
            return Err(format!("round {i} is not in I"));
        }
        if round.tag != RoundTag::Generate {
            return Err(format!("round {i} is not a generation round"));
        }
        let t = Trapdoor::from_hex(hex).map_err(|e| format!("round {i}: {e}"))?;
        if t.key_id() != round.pair_b.key.id() {
            return Err(format!("round {i}: trapdoor does not match the key"));
        }
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ReceiverPolicy;

    fn cfg(n: usize) -> ProtocolConfig {
        ProtocolConfig { n, l: 3, domain_bits: 4, threshold: 0.05, ..Default::default() }
    }

    #[test]
    fn honest_runs_complete() {
        for seed in 0..6 {
            let run = run_protocol4(&cfg(256), &Protocol4Options::default(), SeedTree::new(seed)).unwrap();
            assert!(!run.outcome.aborted, "seed {seed}");
            assert_eq!(run.failed, 0);
            assert!(run.outcome.correct(), "seed {seed}");
            assert!(run.leak.is_empty());
            let sets = &run.outcome.index_sets;
            for &i in &sets.tilde_i {
                assert!(sets.i.contains(&i));
                assert_eq!(run.records[i].t, Some(RoundTag::Generate));
                assert_eq!(run.records[i].rt, RoundType::Bell);
            }
            let mut union: Vec<usize> = sets.tilde_i_0.iter().chain(&sets.tilde_i_1).copied().collect();
            union.sort_unstable();
            assert_eq!(union, sets.tilde_i);
        }
    }

    #[test]
    fn trapdoors_only_released_for_the_generation_set() {
        let run = run_protocol4(&cfg(64), &Protocol4Options::default(), SeedTree::new(3)).unwrap();
        let tilde = run.outcome.index_sets.tilde_i.clone();
        for m in &run.transcript.messages {
            if m.payload.to == Party::Local {
                continue;
            }
            let text = serde_json::to_string(&m.payload).unwrap();
            assert!(!text.contains("theta"), "{text}");
            if let Body::TildeI { indices, trapdoors } = &m.payload.body {
                assert_eq!(m.step, 6);
                assert_eq!(indices, &tilde);
                for (&i, t) in indices.iter().zip(trapdoors) {
                    assert_eq!(Trapdoor::from_hex(t).unwrap().key_id(), run.records[i].key_b);
                }
            } else {
                for r in &run.records {
                    assert!(!text.contains(&r.key_b.to_string()) || matches!(m.payload.body, Body::Key { .. }));
                }
            }
        }
    }

    #[test]
    fn forced_coins_and_invalid_generation_set() {
        let c = cfg(16);
        let probe = run_protocol4(&c, &Protocol4Options::default(), SeedTree::new(5)).unwrap();
        let coins = vec![true; probe.override_rounds];
        let opts = Protocol4Options { forced_overrides: Some(coins), forced_choice: Some(1), ..Default::default() };
        let run = run_protocol4(&c, &opts, SeedTree::new(5)).unwrap();
        assert_eq!(run.outcome.index_sets.i.len(), probe.override_rounds);
        assert_eq!(run.outcome.choice_bit, 1);
        let short = Protocol4Options { forced_overrides: Some(Vec::new()), ..Default::default() };
        if probe.override_rounds > 0 {
            assert!(run_protocol4(&c, &short, SeedTree::new(5)).is_err());
        }
        // a generation set outside I makes the receiver abort
        let mut aborted = 0;
        for seed in 0..30 {
            let opts = Protocol4Options { sender: SenderScript::InvalidTildeI, ..Default::default() };
            let run = run_protocol4(&cfg(32), &opts, SeedTree::new(seed)).unwrap();
            let generate = run.records.iter().filter(|r| r.t == Some(RoundTag::Generate)).count();
            let generate_in_i = run.records.iter().filter(|r| r.t == Some(RoundTag::Generate) && r.in_i).count();
            assert_eq!(run.outcome.aborted, generate != generate_in_i);
            aborted += usize::from(run.outcome.aborted);
        }
        assert!(aborted > 0);
    }

    #[test]
    fn unbounded_receiver_with_trapdoors_learns_both() {
        let opts = Protocol4Options { receiver: ReceiverStrategy::Unbounded, ..Default::default() };
        for seed in 0..4 {
            let run = run_protocol4(&cfg(256), &opts, SeedTree::new(seed)).unwrap();
            assert!(!run.outcome.aborted);
            let [g0, g1] = run.guesses.clone().unwrap();
            assert_eq!(Some(g0), run.outcome.s0);
            assert_eq!(Some(g1), run.outcome.s1);
            assert_eq!(run.stored_rounds, run.outcome.index_sets.tilde_i.len());
        }
    }

    #[test]
    fn bounded_receiver_hits_the_checkpoint_structurally() {
        let opts = Protocol4Options { receiver: ReceiverStrategy::Bounded { capacity: 1, policy: ReceiverPolicy::RandomBases }, ..Default::default() };
        let run = run_protocol4(&cfg(128), &opts, SeedTree::new(1)).unwrap();
        assert!(run.stored_rounds <= 1);
    }
}
