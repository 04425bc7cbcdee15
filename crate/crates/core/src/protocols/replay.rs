//! Recompute every derived quantity of a transcript from its raw messages.
//!
//! Checks run in a fixed order (verdicts, abort, generation set, corrections,
//! `s0`, `s1`, receiver output) and the first divergence is reported.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::check::classify;
use super::ot1::{corrections, ReceiverStrategy};
use super::ot4::{Protocol4Options, SenderScript};
use super::transcript::{Body, Party, ProtocolKind, TestData, Transcript};
use super::{compute_corrections, hash_selection, split_by_basis, winning_check, RoundRecord, RoundTag, Verdict};
use crate::bits::BitString;
use crate::entcf::{ChallengeType, KeyId, KeyRegistry, Trapdoor};
use crate::error::{Error, Result};
use crate::hashing::HashFunction;
use crate::qsim::{Basis, BellLabel, Side};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub protocol: ProtocolKind,
    pub messages: usize,
    /// Fields recomputed and found equal, in check order.
    pub checked: Vec<String>,
}

fn mismatch<T: Debug>(field: &str, recorded: T, recomputed: T) -> Error {
    Error::ReplayMismatch { field: field.to_string(), recorded: format!("{recorded:?}"), recomputed: format!("{recomputed:?}") }
}

fn compare<T: Debug + PartialEq>(field: &str, recorded: T, recomputed: T, checked: &mut Vec<String>) -> Result<()> {
    if recorded != recomputed {
        return Err(mismatch(field, recorded, recomputed));
    }
    checked.push(field.to_string());
    Ok(())
}

fn missing(what: &str) -> Error {
    Error::Malformed(format!("transcript lacks {what}"))
}

pub fn replay(t: &Transcript) -> Result<ReplayVerdict> {
    let mut checked = Vec::new();
    match t.protocol {
        ProtocolKind::Ot1 => replay_ot1(t, &mut checked)?,
        ProtocolKind::Ot4 => replay_ot4(t, &mut checked)?,
    }
    Ok(ReplayVerdict { protocol: t.protocol.clone(), messages: t.messages.len(), checked })
}

/// Run-level messages, the last one of each kind per owner.
#[derive(Default)]
struct Global<'a> {
    labels_a: Option<&'a BitString>,
    labels_b: Option<&'a BitString>,
    sender_meas: Option<(&'a [Basis], &'a BitString)>,
    receiver_meas: Option<(&'a [Basis], &'a BitString)>,
    w_alpha: Option<&'a BitString>,
    w_beta: Option<&'a BitString>,
    announce: Option<(&'a [Basis], &'a HashFunction, &'a HashFunction)>,
    sender_out: Option<(&'a BitString, &'a BitString)>,
    receiver_out: Option<(u8, &'a BitString)>,
    guesses: Option<(&'a BitString, &'a BitString)>,
    tags: Option<&'a [RoundTag]>,
    index_set: Option<&'a [usize]>,
    verdicts: Option<(&'a [(usize, Verdict)], usize, usize, bool)>,
    tilde_i: Option<(&'a [usize], &'a [String])>,
    aborted: bool,
}

fn collect_global(t: &Transcript) -> Global<'_> {
    let mut g = Global::default();
    for m in t.messages.iter().filter(|m| m.round_index.is_none()) {
        let from = m.sender_of_message;
        match &m.payload.body {
            Body::Labels { v } if m.payload.to == Party::Sender => g.labels_a = Some(v),
            Body::Labels { v } if m.payload.to == Party::Receiver => g.labels_b = Some(v),
            Body::Measurements { bases, bits } if from == Party::Sender => g.sender_meas = Some((bases, bits)),
            Body::Measurements { bases, bits } if from == Party::Receiver => g.receiver_meas = Some((bases, bits)),
            Body::Corrections { w } if from == Party::Sender => g.w_alpha = Some(w),
            Body::Corrections { w } if from == Party::Receiver => g.w_beta = Some(w),
            Body::Announce { x, f0, f1 } => g.announce = Some((x, f0, f1)),
            Body::SenderOutput { s0, s1 } => g.sender_out = Some((s0, s1)),
            Body::ReceiverOutput { c, y } => g.receiver_out = Some((*c, y)),
            Body::Guesses { s0, s1 } => g.guesses = Some((s0, s1)),
            Body::Tags { tags } => g.tags = Some(tags),
            Body::IndexSet { indices } => g.index_set = Some(indices),
            Body::Verdicts { verdicts, tested, failed, abort, .. } => g.verdicts = Some((verdicts, *tested, *failed, *abort)),
            Body::TildeI { indices, trapdoors } => g.tilde_i = Some((indices, trapdoors)),
            Body::Abort { .. } => g.aborted = true,
            _ => {}
        }
    }
    g
}

/// Checks the sender's and receiver's output strings against `f((bits xor w)|_set)`.
#[allow(clippy::too_many_arguments)]
fn check_outputs(
    t: &Transcript,
    g: &Global<'_>,
    a: &BitString,
    b: &BitString,
    x: &[Basis],
    honest: bool,
    checked: &mut Vec<String>,
) -> Result<()> {
    let (_, f0, f1) = g.announce.ok_or_else(|| missing("the announcement"))?;
    let w_alpha = g.w_alpha.ok_or_else(|| missing("sender corrections"))?;
    let w_beta = g.w_beta.ok_or_else(|| missing("receiver corrections"))?;
    let pos: Vec<usize> = (0..x.len()).collect();
    let (i0, i1) = split_by_basis(&pos, x);
    let (s0, s1) = g.sender_out.ok_or_else(|| missing("sender output"))?;
    compare("s0", s0.clone(), hash_selection(f0, a, w_alpha, &i0)?, checked)?;
    compare("s1", s1.clone(), hash_selection(f1, a, w_alpha, &i1)?, checked)?;
    if let Some(outcome) = &t.outcome {
        compare("outcome", (outcome.s0.as_ref(), outcome.s1.as_ref()), (Some(s0), Some(s1)), checked)?;
    }
    let (c, y) = g.receiver_out.ok_or_else(|| missing("receiver output"))?;
    let recomputed = if honest {
        let (f, set) = if c == 0 { (f0, &i0) } else { (f1, &i1) };
        hash_selection(f, b, w_beta, set)?
    } else {
        let (r0, r1) = g.guesses.ok_or_else(|| missing("receiver guesses"))?;
        let q0 = hash_selection(f0, b, w_beta, &i0)?;
        let q1 = hash_selection(f1, b, w_beta, &i1)?;
        compare("guesses", (r0.clone(), r1.clone()), (q0.clone(), q1.clone()), checked)?;
        if c == 0 { q0 } else { q1 }
    };
    compare("receiver_output", y.clone(), recomputed, checked)
}

fn replay_ot1(t: &Transcript, checked: &mut Vec<String>) -> Result<()> {
    let g = collect_global(t);
    let opts: super::Protocol1Options = serde_json::from_value(t.options.clone()).map_err(|e| Error::Malformed(format!("options: {e}")))?;
    let va = g.labels_a.ok_or_else(|| missing("sender labels"))?;
    let vb = g.labels_b.ok_or_else(|| missing("receiver labels"))?;
    if va.len() != vb.len() {
        return Err(Error::Malformed("label lengths differ".into()));
    }
    let labels = (0..va.len()).map(|i| BellLabel::new(va.bit(i), vb.bit(i))).collect::<Result<Vec<_>>>()?;
    let (x, a) = g.sender_meas.ok_or_else(|| missing("sender measurements"))?;
    let (y, b) = g.receiver_meas.ok_or_else(|| missing("receiver measurements"))?;
    let w_alpha = g.w_alpha.ok_or_else(|| missing("sender corrections"))?;
    let w_beta = g.w_beta.ok_or_else(|| missing("receiver corrections"))?;
    compare("w_alpha", w_alpha.clone(), corrections(x, Side::Sender, &labels), checked)?;
    compare("w_beta", w_beta.clone(), corrections(y, Side::Receiver, &labels), checked)?;
    check_outputs(t, &g, a, b, x, opts.receiver.is_honest(), checked)
}

/// Raw per-round data of a device-independent run.
#[derive(Default)]
struct RoundData<'a> {
    key_a: Option<KeyId>,
    key_b: Option<KeyId>,
    c_a: Option<&'a BitString>,
    c_b: Option<&'a BitString>,
    z_a: Option<&'a BitString>,
    z_b: Option<&'a BitString>,
    d_a: Option<&'a BitString>,
    d_b: Option<&'a BitString>,
    answer_a: Option<(u8, u8)>,
    answer_b: Option<(u8, u8)>,
    question_b: Option<Basis>,
    sender: Option<(Basis, Basis, &'a str, &'a str, ChallengeType, Option<Basis>, Option<Basis>)>,
    receiver: Option<(bool, Option<Basis>)>,
    test: Option<&'a TestData>,
}

impl RoundData<'_> {
    fn record(&self, index: usize, y: Option<Basis>, b: Option<(u8, u8)>) -> Result<RoundRecord> {
        let (theta_a, theta_b, _, _, ct, x, _) = self.sender.ok_or_else(|| missing(&format!("the sender record of round {index}")))?;
        Ok(RoundRecord {
            index,
            theta_a,
            theta_b,
            key_a: self.key_a.ok_or_else(|| missing("key a"))?,
            key_b: self.key_b.ok_or_else(|| missing("key b"))?,
            c_a: self.c_a.cloned().ok_or_else(|| missing("commitment a"))?,
            c_b: self.c_b.cloned().ok_or_else(|| missing("commitment b"))?,
            ct,
            ct_b: None,
            z_a: self.z_a.cloned(),
            z_b: self.z_b.cloned(),
            d_a: self.d_a.cloned(),
            d_b: self.d_b.cloned(),
            x,
            y,
            a_bit: self.answer_a.map(|p| p.0),
            b_bit: b.map(|p| p.0),
            h_a: self.answer_a.map(|p| p.1),
            h_b: b.map(|p| p.1),
            rt: classify(ct, ct, theta_a, theta_b),
            t: None,
            in_i: false,
            w: None,
        })
    }
}

fn replay_ot4(t: &Transcript, checked: &mut Vec<String>) -> Result<()> {
    let opts: Protocol4Options = serde_json::from_value(t.options.clone()).map_err(|e| Error::Malformed(format!("options: {e}")))?;
    let g = collect_global(t);
    let mut rounds: BTreeMap<usize, RoundData<'_>> = BTreeMap::new();
    for m in &t.messages {
        let Some(i) = m.round_index else { continue };
        let r = rounds.entry(i).or_default();
        let (from, to) = (m.sender_of_message, m.payload.to);
        match &m.payload.body {
            Body::Key { key_id, .. } if to == Party::ComponentA => r.key_a = Some(*key_id),
            Body::Key { key_id, .. } if from == Party::Sender && to == Party::Receiver => r.key_b = Some(*key_id),
            Body::Commitment { c } if from == Party::ComponentA => r.c_a = Some(c),
            Body::Commitment { c } if from == Party::ComponentB => r.c_b = Some(c),
            Body::Preimage { z } if from == Party::ComponentA => r.z_a = Some(z),
            Body::Preimage { z } if from == Party::ComponentB => r.z_b = Some(z),
            Body::Equation { d } if from == Party::ComponentA => r.d_a = Some(d),
            Body::Equation { d } if from == Party::ComponentB => r.d_b = Some(d),
            Body::Answer { bit, h } if from == Party::ComponentA => r.answer_a = Some((*bit, *h)),
            Body::Answer { bit, h } if from == Party::ComponentB => r.answer_b = Some((*bit, *h)),
            Body::Question { basis } if to == Party::ComponentB => r.question_b = Some(*basis),
            Body::SenderRound { theta_a, theta_b, trapdoor_a, trapdoor_b, ct, x, y } => {
                r.sender = Some((*theta_a, *theta_b, trapdoor_a, trapdoor_b, *ct, *x, *y));
            }
            Body::ReceiverRound { overridden, y } => r.receiver = Some((*overridden, *y)),
            Body::Test { data } => r.test = Some(data),
            _ => {}
        }
    }
    let n = t.config.n;
    if rounds.len() != n || rounds.keys().next_back().is_some_and(|&k| k + 1 != n) {
        return Err(Error::Malformed(format!("expected {n} rounds, found {}", rounds.len())));
    }
    let mut registry = KeyRegistry::new();
    let mut trapdoors_b = Vec::with_capacity(n);
    for (i, r) in &rounds {
        let (_, _, ta, tb, ..) = r.sender.ok_or_else(|| missing(&format!("the sender record of round {i}")))?;
        registry.insert(Trapdoor::from_hex(ta)?);
        let tb = Trapdoor::from_hex(tb)?;
        registry.insert(tb.clone());
        trapdoors_b.push(tb);
    }

    // verdicts over the published test rounds, against the sender's question
    let tags = g.tags.ok_or_else(|| missing("round tags"))?;
    let i_set = g.index_set.ok_or_else(|| missing("the index set I"))?;
    let (verdicts, tested, failed, abort) = g.verdicts.ok_or_else(|| missing("verdicts"))?;
    let mut recomputed = Vec::new();
    for (&i, r) in &rounds {
        if tags.get(i) != Some(&RoundTag::Test) || i_set.contains(&i) {
            continue;
        }
        let data = r.test.ok_or_else(|| missing(&format!("test data of round {i}")))?;
        let mut rec = r.record(i, r.sender.and_then(|s| s.6), data.b.zip(data.h))?;
        rec.c_b = data.c.clone();
        rec.z_b = data.z.clone();
        rec.d_b = data.d.clone();
        recomputed.push((i, winning_check(&rec, &registry)?));
    }
    let fails = recomputed.iter().filter(|(_, v)| *v == Verdict::Fail).count();
    compare("verdicts", (verdicts.to_vec(), tested, failed), (recomputed.clone(), recomputed.len(), fails), checked)?;
    let fraction = if recomputed.is_empty() { 0.0 } else { fails as f64 / recomputed.len() as f64 };
    compare("abort", abort, fraction > t.config.threshold, checked)?;
    if abort {
        compare("outputs_withheld", g.sender_out.is_some() || g.receiver_out.is_some(), false, checked)?;
        return Ok(());
    }

    // generation set
    let expected: Vec<usize> = match opts.sender {
        SenderScript::InvalidTildeI => (0..n).filter(|&i| tags[i] == RoundTag::Generate).collect(),
        _ => i_set.iter().copied().filter(|&i| tags.get(i) == Some(&RoundTag::Generate)).collect(),
    };
    let (tilde_i, published) = g.tilde_i.ok_or_else(|| missing("the generation set"))?;
    compare("tilde_i", tilde_i.to_vec(), expected, checked)?;
    let released: Vec<String> = tilde_i.iter().map(|&i| trapdoors_b[i].to_hex()).collect();
    compare("tilde_i_trapdoors", published.to_vec(), released, checked)?;
    if g.aborted {
        // the receiver rejected the published set
        let valid = tilde_i.iter().all(|&i| i_set.contains(&i) && tags[i] == RoundTag::Generate);
        return compare("receiver_abort", false, valid, checked);
    }

    // corrections
    let mut w_alpha = Vec::new();
    let mut w_beta = Vec::new();
    let recorded_beta = g.w_beta.ok_or_else(|| missing("receiver corrections"))?;
    let guessing = !opts.receiver.is_honest() && !opts.attack_uses_trapdoors;
    for (p, &i) in tilde_i.iter().enumerate() {
        let r = &rounds[&i];
        let y_used = r.question_b;
        let rec = r.record(i, y_used, r.answer_b)?;
        let (_, _, ta, ..) = r.sender.expect("checked above");
        w_alpha.push(compute_corrections(&rec, Side::Sender, &Trapdoor::from_hex(ta)?)?);
        if guessing && y_used == Some(Basis::Computational) {
            w_beta.push(recorded_beta.bit(p));
        } else {
            w_beta.push(compute_corrections(&rec, Side::Receiver, &trapdoors_b[i])?);
        }
    }
    compare("w_alpha", g.w_alpha.cloned(), Some(BitString::from_u8s(&w_alpha)), checked)?;
    compare("w_beta", recorded_beta.clone(), BitString::from_u8s(&w_beta), checked)?;

    let (x, ..) = g.announce.ok_or_else(|| missing("the announcement"))?;
    let x_expected: Vec<Basis> = tilde_i.iter().map(|i| rounds[i].sender.and_then(|s| s.5).ok_or_else(|| missing("x"))).collect::<Result<_>>()?;
    compare("announced_x", x.to_vec(), x_expected, checked)?;
    let bit = |v: Option<(u8, u8)>| v.map(|p| p.0).ok_or_else(|| missing("an answer bit"));
    let a = BitString::from_u8s(&tilde_i.iter().map(|i| bit(rounds[i].answer_a)).collect::<Result<Vec<u8>>>()?);
    let b = BitString::from_u8s(&tilde_i.iter().map(|i| bit(rounds[i].answer_b)).collect::<Result<Vec<u8>>>()?);
    let honest = matches!(opts.receiver, ReceiverStrategy::Honest);
    check_outputs(t, &g, &a, &b, x, honest, checked)
}
