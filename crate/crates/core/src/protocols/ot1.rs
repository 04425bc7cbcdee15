//! Rand 1-2 OT from Bell pairs with known labels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transcript::{Body, Party, ProtocolKind, Transcript};
use super::{hash_selection, split_by_basis, IndexSets, OtOutcome, ProtocolConfig};
use crate::bits::BitString;
use crate::error::Result;
use crate::hashing::{sample_hash, HashFunction};
use crate::qsim::{make_bell, Basis, BellLabel, Lab, QubitId, Side};
use crate::rng::{label, SeedTree};

/// How a storage-bounded receiver measures the qubits it cannot keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverPolicy {
    /// Independent uniform basis per qubit.
    RandomBases,
    Computational,
    /// The honest basis `[Computational, Hadamard]_c`.
    ChoiceBasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReceiverStrategy {
    Honest,
    /// Keeps `capacity` qubits past the checkpoint, measures the rest by
    /// `policy`, then measures the kept ones in the announced bases and
    /// guesses both strings.
    Bounded { capacity: usize, policy: ReceiverPolicy },
    /// Keeps everything.
    Unbounded,
}

impl ReceiverStrategy {
    pub fn is_honest(&self) -> bool {
        matches!(self, ReceiverStrategy::Honest)
    }

    /// Qubits kept past the checkpoint when `rounds` are available.
    pub fn kept(&self, rounds: usize) -> usize {
        match *self {
            ReceiverStrategy::Honest => 0,
            ReceiverStrategy::Bounded { capacity, .. } => capacity.min(rounds),
            ReceiverStrategy::Unbounded => rounds,
        }
    }

    pub(crate) fn policy(&self) -> ReceiverPolicy {
        match *self {
            ReceiverStrategy::Bounded { policy, .. } => policy,
            _ => ReceiverPolicy::ChoiceBasis,
        }
    }

    /// The string this strategy aims to learn for sure.
    pub fn effective_choice(&self, c: u8) -> u8 {
        match self.policy() {
            ReceiverPolicy::Computational => 0,
            _ => c,
        }
    }
}

pub(crate) fn policy_basis<R: Rng + ?Sized>(policy: ReceiverPolicy, c: u8, rng: &mut R) -> Basis {
    match policy {
        ReceiverPolicy::RandomBases => Basis::from_bit(rng.random_range(0..2)),
        ReceiverPolicy::Computational => Basis::Computational,
        ReceiverPolicy::ChoiceBasis => Basis::from_bit(c),
    }
}

/// Labels prepared by the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Uniform,
    Fixed { v_alpha: u8, v_beta: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol1Options {
    pub receiver: ReceiverStrategy,
    pub source: SourceKind,
    /// Overrides the receiver's sampled choice bit.
    pub forced_choice: Option<u8>,
}

impl Default for Protocol1Options {
    fn default() -> Self {
        Self { receiver: ReceiverStrategy::Honest, source: SourceKind::Uniform, forced_choice: None }
    }
}

#[derive(Clone, Debug)]
pub struct Protocol1Run {
    pub outcome: OtOutcome,
    pub transcript: Transcript,
    /// A dishonest receiver's guesses of `(s_0, s_1)`.
    pub guesses: Option<[BitString; 2]>,
    pub labels: Vec<BellLabel>,
}

/// `w` for one round: the label bit when the basis needs it, else 0.
fn correction(basis: Basis, side: Side, label: BellLabel) -> u8 {
    match (side, basis) {
        (Side::Sender, Basis::Hadamard) => label.v_alpha,
        (Side::Receiver, Basis::Computational) => label.v_beta,
        _ => 0,
    }
}

pub(crate) fn corrections(bases: &[Basis], side: Side, labels: &[BellLabel]) -> BitString {
    BitString::from_u8s(&bases.iter().zip(labels).map(|(b, l)| correction(*b, side, *l)).collect::<Vec<u8>>())
}

pub(crate) fn label_bits(labels: &[BellLabel], side: Side) -> BitString {
    BitString::from_u8s(&labels.iter().map(|l| if side == Side::Sender { l.v_alpha } else { l.v_beta }).collect::<Vec<u8>>())
}

pub fn run_protocol1(cfg: &ProtocolConfig, opts: &Protocol1Options, tree: SeedTree) -> Result<Protocol1Run> {
    cfg.validate()?;
    let n = cfg.n;
    let mut source = tree.child(label::SOURCE).rng();
    let mut sender = tree.child(label::SENDER).rng();
    let mut receiver = tree.child(label::RECEIVER).rng();
    let options = serde_json::to_value(opts).expect("plain data");
    let mut t = Transcript::new(ProtocolKind::Ot1, cfg.clone(), options);
    let mut lab = Lab::new();

    // Step 1: labelled Bell pairs, first qubit to the sender
    let mut labels = Vec::with_capacity(n);
    let mut qubits: Vec<(QubitId, QubitId)> = Vec::with_capacity(n);
    for _ in 0..n {
        let l = match opts.source {
            SourceKind::Uniform => BellLabel::new(source.random_range(0..2), source.random_range(0..2))?,
            SourceKind::Fixed { v_alpha, v_beta } => BellLabel::new(v_alpha, v_beta)?,
        };
        let ids = lab.insert(make_bell(l), &[Side::Sender, Side::Receiver])?;
        labels.push(l);
        qubits.push((ids[0], ids[1]));
    }
    t.send(1, Party::Source, Party::Sender, None, Body::Labels { v: label_bits(&labels, Side::Sender) });
    t.send(1, Party::Source, Party::Receiver, None, Body::Labels { v: label_bits(&labels, Side::Receiver) });

    // Step 2: the receiver measures what it will not keep
    let c = opts.forced_choice.unwrap_or_else(|| receiver.random_range(0..2)) & 1;
    let kept = opts.receiver.kept(n);
    let policy = opts.receiver.policy();
    let mut y = vec![Basis::Computational; n];
    let mut b = vec![0u8; n];
    for i in kept..n {
        y[i] = policy_basis(policy, c, &mut receiver);
        b[i] = lab.port(Side::Receiver).measure(qubits[i].1, y[i], receiver.random())?;
    }

    // Step 3: the sender measures in random bases
    let x: Vec<Basis> = (0..n).map(|_| Basis::from_bit(sender.random_range(0..2))).collect();
    let mut a = vec![0u8; n];
    for i in 0..n {
        a[i] = lab.port(Side::Sender).measure(qubits[i].0, x[i], sender.random())?;
    }
    let a = BitString::from_u8s(&a);
    let w_alpha = corrections(&x, Side::Sender, &labels);
    t.record(3, Party::Sender, None, Body::Measurements { bases: x.clone(), bits: a.clone() });
    t.record(3, Party::Sender, None, Body::Corrections { w: w_alpha.clone() });

    // Step 4: storage checkpoint, then the announcement
    lab.checkpoint(Side::Receiver, kept)?;
    let f0: HashFunction = sample_hash(n, cfg.l, &mut sender)?;
    let f1: HashFunction = sample_hash(n, cfg.l, &mut sender)?;
    t.send(4, Party::Sender, Party::Receiver, None, Body::Announce { x: x.clone(), f0: f0.clone(), f1: f1.clone() });
    let (i0, i1) = split_by_basis(&(0..n).collect::<Vec<_>>(), &x);
    let s0 = hash_selection(&f0, &a, &w_alpha, &i0)?;
    let s1 = hash_selection(&f1, &a, &w_alpha, &i1)?;
    t.record(4, Party::Sender, None, Body::SenderOutput { s0: s0.clone(), s1: s1.clone() });

    // Step 5: kept qubits are measured in the announced bases
    for i in 0..kept {
        y[i] = x[i];
        b[i] = lab.port(Side::Receiver).measure(qubits[i].1, y[i], receiver.random())?;
    }
    let b = BitString::from_u8s(&b);
    let w_beta = corrections(&y, Side::Receiver, &labels);
    t.record(5, Party::Receiver, None, Body::Measurements { bases: y.clone(), bits: b.clone() });
    t.record(5, Party::Receiver, None, Body::Corrections { w: w_beta.clone() });
    let choice = opts.receiver.effective_choice(c);
    let (guesses, output) = if opts.receiver.is_honest() {
        let f = if c == 0 { &f0 } else { &f1 };
        let set = if c == 0 { &i0 } else { &i1 };
        (None, hash_selection(f, &b, &w_beta, set)?)
    } else {
        let g0 = hash_selection(&f0, &b, &w_beta, &i0)?;
        let g1 = hash_selection(&f1, &b, &w_beta, &i1)?;
        t.record(5, Party::Receiver, None, Body::Guesses { s0: g0.clone(), s1: g1.clone() });
        let out = if choice == 0 { g0.clone() } else { g1.clone() };
        (Some([g0, g1]), out)
    };
    t.record(5, Party::Receiver, None, Body::ReceiverOutput { c: choice, y: output.clone() });

    let outcome = OtOutcome {
        aborted: false,
        s0: Some(s0),
        s1: Some(s1),
        receiver_output: Some(output),
        choice_bit: choice,
        index_sets: IndexSets { i: Vec::new(), tilde_i: (0..n).collect(), tilde_i_0: i0, tilde_i_1: i1 },
    };
    t.outcome = Some(outcome.clone());
    Ok(Protocol1Run { outcome, transcript: t, guesses, labels })
}
