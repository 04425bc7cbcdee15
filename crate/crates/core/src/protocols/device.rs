//! Device components.
//!
//! A device has one component per party. Each component sees only the
//! messages its party sends it. The components share a per-round [`Link`]
//! (an EPR pair created on first use plus pre-shared classical randomness)
//! and nothing else; any other cross-component traffic must go through the
//! [`LeakLog`], which is empty for every non-leaking device.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::entcf::{honest_device_challenge, honest_device_prepare, ChallengeResponse, ChallengeType, PublicKey};
use crate::error::{Error, Result};
use crate::qsim::{Basis, Lab, QubitId, Side, StateVector, C64};
use crate::rng::StreamRng;

/// Reply to a challenge type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reply {
    Preimage { z: BitString },
    Equation { d: BitString },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakRecord {
    pub round: usize,
    pub from: Side,
    pub bits: Vec<u8>,
}

/// Every message that crosses between the components outside the link.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakLog {
    records: Vec<LeakRecord>,
}

impl LeakLog {
    pub fn push(&mut self, record: LeakRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[LeakRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Per-round resources shared by the two components.
#[derive(Clone, Debug)]
pub struct Link {
    epr: Option<[QubitId; 2]>,
    shared: u64,
}

impl Link {
    pub fn new(shared: u64) -> Self {
        Self { epr: None, shared }
    }

    /// The round's EPR pair; the first half belongs to the sender's component.
    pub fn epr(&mut self, lab: &mut Lab) -> Result<[QubitId; 2]> {
        if let Some(ids) = self.epr {
            return Ok(ids);
        }
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        let ids = lab.insert(StateVector::from_amplitudes(vec![r, z, z, r])?, &[Side::Sender, Side::Receiver])?;
        let pair = [ids[0], ids[1]];
        self.epr = Some(pair);
        Ok(pair)
    }

    /// Classical randomness both components fixed before the round.
    pub fn shared_rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.shared)
    }

    /// Measures and discards whatever half of the pair `side` still holds.
    pub fn release(&mut self, lab: &mut Lab, side: Side) -> Result<()> {
        if let Some(ids) = self.epr {
            let q = ids[usize::from(side == Side::Receiver)];
            if lab.owner(q) == Some(side) {
                lab.port(side).measure(q, Basis::Computational, 0.5)?;
            }
        }
        Ok(())
    }
}

/// What a component can touch while handling one message.
pub struct Ctx<'a> {
    pub round: usize,
    pub side: Side,
    pub lab: &'a mut Lab,
    pub link: &'a mut Link,
    pub leak: &'a mut LeakLog,
    pub rng: &'a mut StreamRng,
}

pub trait DeviceComponent: Send {
    fn commit(&mut self, key: &PublicKey, ctx: &mut Ctx<'_>) -> Result<BitString>;
    fn challenge(&mut self, ct: ChallengeType, ctx: &mut Ctx<'_>) -> Result<Reply>;
    /// Answer bit and `h` bit for a basis question.
    fn answer(&mut self, basis: Basis, ctx: &mut Ctx<'_>) -> Result<(u8, u8)>;
    /// Work that does not depend on the basis question. An honest component
    /// runs its half of the circuit here, leaving one unmeasured qubit.
    fn precompute(&mut self, _ctx: &mut Ctx<'_>) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalStrategy {
    /// Uniform strings and bits everywhere.
    RandomAnswers,
    /// Honest classical evaluation for challenge type a, random bits for b.
    ImageHonestBellRandom,
    /// Honest classical evaluation for a; for b a uniform `d`, the committed
    /// bit combined with `h` in the basis where a computational-key state is
    /// fixed, and a pre-shared bit otherwise.
    BestKnown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceKind {
    Honest,
    Classical { strategy: ClassicalStrategy },
    /// Honest quantum behaviour, except that the receiver's component reports
    /// every basis question to the sender's component, which echoes the most
    /// recent one in its `h` bit. Exists to show the receiver-security
    /// experiment detects cross-component leakage.
    Leaky,
}

impl DeviceKind {
    pub fn component(&self, side: Side) -> Box<dyn DeviceComponent> {
        match *self {
            DeviceKind::Honest => Box::new(Honest::default()),
            DeviceKind::Classical { strategy } => Box::new(Classical { strategy, side, committed: None }),
            DeviceKind::Leaky => Box::new(Leaky { inner: Honest::default() }),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DeviceKind::Honest => "honest".into(),
            DeviceKind::Classical { strategy } => {
                serde_json::to_value(strategy).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
            }
            DeviceKind::Leaky => "leaky".into(),
        }
    }
}

#[derive(Default)]
struct Honest {
    residual: Option<StateVector>,
    retained: Option<QubitId>,
    h: Option<u8>,
}

impl Honest {
    fn retained(&self) -> Result<QubitId> {
        self.retained.ok_or_else(|| Error::Protocol { party: "device", reason: "basis question before challenge type b".into() })
    }
}

impl DeviceComponent for Honest {
    fn commit(&mut self, key: &PublicKey, ctx: &mut Ctx<'_>) -> Result<BitString> {
        let (c, residual) = honest_device_prepare(key, ctx.rng.random())?;
        self.residual = Some(residual);
        Ok(c)
    }

    fn challenge(&mut self, ct: ChallengeType, ctx: &mut Ctx<'_>) -> Result<Reply> {
        let residual = self
            .residual
            .take()
            .ok_or_else(|| Error::Protocol { party: "device", reason: "challenge before key".into() })?;
        Ok(match honest_device_challenge(&residual, ct, ctx.rng)? {
            ChallengeResponse::Preimage { z } => Reply::Preimage { z },
            ChallengeResponse::Equation { d, retained } => {
                self.retained = Some(ctx.lab.insert(retained, &[ctx.side])?[0]);
                Reply::Equation { d }
            }
        })
    }

    fn precompute(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if self.h.is_some() {
            return Ok(());
        }
        let q = self.retained()?;
        let [e1, e2] = ctx.link.epr(ctx.lab)?;
        let sample = ctx.rng.random();
        let mut port = ctx.lab.port(ctx.side);
        let h = match ctx.side {
            Side::Sender => {
                port.cnot(e1, q)?;
                port.measure(q, Basis::Computational, sample)?
            }
            Side::Receiver => {
                // H, CNOT onto the retained qubit, then the commuted H
                port.h(e2)?;
                port.cnot(e2, q)?;
                let h = port.measure(q, Basis::Computational, sample)?;
                port.h(e2)?;
                h
            }
        };
        self.h = Some(h);
        Ok(())
    }

    fn answer(&mut self, basis: Basis, ctx: &mut Ctx<'_>) -> Result<(u8, u8)> {
        self.precompute(ctx)?;
        let [e1, e2] = ctx.link.epr(ctx.lab)?;
        let e = if ctx.side == Side::Sender { e1 } else { e2 };
        let bit = ctx.lab.port(ctx.side).measure(e, basis, ctx.rng.random())?;
        Ok((bit, self.h.expect("set by precompute")))
    }
}

struct Classical {
    strategy: ClassicalStrategy,
    side: Side,
    committed: Option<(u8, u64, usize)>,
}

fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.random::<bool>()).collect())
}

impl DeviceComponent for Classical {
    fn commit(&mut self, key: &PublicKey, ctx: &mut Ctx<'_>) -> Result<BitString> {
        let m = key.domain_bits();
        match self.strategy {
            ClassicalStrategy::RandomAnswers => {
                self.committed = Some((0, 0, m));
                Ok(random_bits(key.image_bits(), ctx.rng))
            }
            ClassicalStrategy::ImageHonestBellRandom | ClassicalStrategy::BestKnown => {
                let b = if self.strategy == ClassicalStrategy::BestKnown {
                    // committed bits come from the pre-shared table
                    let mut shared = ctx.link.shared_rng();
                    let pair: [u8; 2] = [shared.random_range(0..2), shared.random_range(0..2)];
                    pair[usize::from(self.side == Side::Receiver)]
                } else {
                    ctx.rng.random_range(0..2)
                };
                let x = ctx.rng.random_range(0..1u64 << m);
                self.committed = Some((b, x, m));
                Ok(BitString::from_uint(key.eval_index(b, x), m + 1))
            }
        }
    }

    fn challenge(&mut self, ct: ChallengeType, ctx: &mut Ctx<'_>) -> Result<Reply> {
        let (b, x, m) = self
            .committed
            .ok_or_else(|| Error::Protocol { party: "device", reason: "challenge before key".into() })?;
        Ok(match (ct, self.strategy) {
            (ChallengeType::A, ClassicalStrategy::RandomAnswers) => Reply::Preimage { z: random_bits(m + 1, ctx.rng) },
            (ChallengeType::A, _) => {
                let mut z = BitString::from_u8s(&[b]);
                for bit in BitString::from_uint(x, m).iter() {
                    z.push(bit);
                }
                Reply::Preimage { z }
            }
            (ChallengeType::B, _) => Reply::Equation { d: random_bits(m, ctx.rng) },
        })
    }

    fn answer(&mut self, basis: Basis, ctx: &mut Ctx<'_>) -> Result<(u8, u8)> {
        match self.strategy {
            ClassicalStrategy::RandomAnswers | ClassicalStrategy::ImageHonestBellRandom => {
                Ok((ctx.rng.random_range(0..2), ctx.rng.random_range(0..2)))
            }
            ClassicalStrategy::BestKnown => {
                let (b, _, _) = self.committed.expect("committed before answering");
                let mut shared = ctx.link.shared_rng();
                let _committed: [u8; 2] = [shared.random_range(0..2), shared.random_range(0..2)];
                let r: u8 = shared.random_range(0..2);
                let h: u8 = ctx.rng.random_range(0..2);
                let natural = match self.side {
                    Side::Sender => Basis::Computational,
                    Side::Receiver => Basis::Hadamard,
                };
                Ok((if basis == natural { b ^ h } else { r }, h))
            }
        }
    }
}

struct Leaky {
    inner: Honest,
}

impl DeviceComponent for Leaky {
    fn commit(&mut self, key: &PublicKey, ctx: &mut Ctx<'_>) -> Result<BitString> {
        self.inner.commit(key, ctx)
    }

    fn challenge(&mut self, ct: ChallengeType, ctx: &mut Ctx<'_>) -> Result<Reply> {
        self.inner.challenge(ct, ctx)
    }

    fn precompute(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        self.inner.precompute(ctx)
    }

    fn answer(&mut self, basis: Basis, ctx: &mut Ctx<'_>) -> Result<(u8, u8)> {
        let (bit, h) = self.inner.answer(basis, ctx)?;
        match ctx.side {
            Side::Receiver => {
                ctx.leak.push(LeakRecord { round: ctx.round, from: Side::Receiver, bits: vec![basis.bit()] });
                Ok((bit, h))
            }
            Side::Sender => {
                let echoed = ctx.leak.records().iter().rev().find(|r| r.from == Side::Receiver).map(|r| r.bits[0]);
                Ok((bit, echoed.unwrap_or(h)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entcf::keygen;

    fn ctx_parts() -> (Lab, Link, LeakLog, StreamRng) {
        (Lab::new(), Link::new(5), LeakLog::default(), StreamRng::seed_from_u64(9))
    }

    #[test]
    fn honest_round_leaves_no_live_qubits() {
        let (mut lab, mut link, mut leak, mut rng) = ctx_parts();
        let mut krng = StreamRng::seed_from_u64(1);
        let ka = keygen(Basis::Hadamard, 4, &mut krng).unwrap();
        let kb = keygen(Basis::Computational, 4, &mut krng).unwrap();
        let mut a = DeviceKind::Honest.component(Side::Sender);
        let mut b = DeviceKind::Honest.component(Side::Receiver);
        let mut rng_b = StreamRng::seed_from_u64(10);
        macro_rules! ctx {
            ($side:expr, $rng:expr) => {
                Ctx { round: 0, side: $side, lab: &mut lab, link: &mut link, leak: &mut leak, rng: $rng }
            };
        }
        a.commit(&ka.key, &mut ctx!(Side::Sender, &mut rng)).unwrap();
        b.commit(&kb.key, &mut ctx!(Side::Receiver, &mut rng_b)).unwrap();
        a.challenge(ChallengeType::B, &mut ctx!(Side::Sender, &mut rng)).unwrap();
        b.challenge(ChallengeType::B, &mut ctx!(Side::Receiver, &mut rng_b)).unwrap();
        assert_eq!(lab.live(Side::Receiver), 1);
        a.answer(Basis::Hadamard, &mut ctx!(Side::Sender, &mut rng)).unwrap();
        b.precompute(&mut ctx!(Side::Receiver, &mut rng_b)).unwrap();
        // the deferred component keeps exactly its half of the pair
        assert_eq!(lab.live(Side::Receiver), 1);
        b.answer(Basis::Computational, &mut ctx!(Side::Receiver, &mut rng_b)).unwrap();
        assert_eq!(lab.live(Side::Receiver), 0);
        assert_eq!(lab.live(Side::Sender), 0);
        assert!(leak.is_empty());
    }

    #[test]
    fn answer_without_challenge_is_a_protocol_error() {
        let (mut lab, mut link, mut leak, mut rng) = ctx_parts();
        let mut a = DeviceKind::Honest.component(Side::Sender);
        let mut ctx = Ctx { round: 0, side: Side::Sender, lab: &mut lab, link: &mut link, leak: &mut leak, rng: &mut rng };
        assert!(matches!(a.answer(Basis::Computational, &mut ctx), Err(Error::Protocol { .. })));
    }
}
