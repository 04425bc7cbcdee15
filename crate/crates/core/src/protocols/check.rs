//! Verifier-side round checks.
//!
//! Challenge type a is an image check per side. For challenge type b the
//! verifier rebuilds the honest pre-measurement state from the trapdoors,
//! post-selects on the reported `h` bits and accepts iff the answers agree
//! with every coordinate (`a`, `b`, `a xor b`) the honest state fixes.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::{RoundRecord, RoundType, Verdict};
use crate::bits::BitString;
use crate::entcf::{ChallengeType, Family, KeyRegistry, Trapdoor};
use crate::error::{Error, Result};
use crate::qsim::{Basis, Side, StateVector, C64};

const A: usize = 0;
const B: usize = 1;
const E1: usize = 2;
const E2: usize = 3;
const DETERMINISTIC_TOL: f64 = 1e-9;

/// Bell iff both sides got challenge type b and both state bases are Hadamard.
pub fn classify_round(record: &RoundRecord) -> RoundType {
    classify(record.ct_a(), record.ct_b(), record.theta_a, record.theta_b)
}

pub(crate) fn classify(ct_a: ChallengeType, ct_b: ChallengeType, theta_a: Basis, theta_b: Basis) -> RoundType {
    if ct_a == ChallengeType::B && ct_b == ChallengeType::B && theta_a == Basis::Hadamard && theta_b == Basis::Hadamard {
        RoundType::Bell
    } else {
        RoundType::Product
    }
}

/// Answers fixed by the honest state; `None` marks a random coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub a: Option<u8>,
    pub b: Option<u8>,
    pub parity: Option<u8>,
}

impl Prediction {
    pub fn accepts(&self, a: Option<u8>, b: Option<u8>) -> bool {
        let ok = |want: Option<u8>, got: Option<u8>| match (want, got) {
            (Some(w), Some(g)) => w == g,
            _ => true,
        };
        let parity = match (a, b) {
            (Some(a), Some(b)) => Some(a ^ b),
            _ => None,
        };
        ok(self.a, a) && ok(self.b, b) && ok(self.parity, parity)
    }
}

/// One side of a challenge-type-b round as seen by the verifier.
#[derive(Clone, Debug)]
pub struct SideInput {
    /// State of the retained qubit just before the circuit.
    pub psi: StateVector,
    pub h: u8,
    pub basis: Basis,
}

fn epr() -> StateVector {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    StateVector::from_amplitudes(vec![r, z, z, r]).expect("normalized")
}

/// Honest answer constraints for the sides present. An absent side performs
/// no operation on its half of the link. `Ok(None)` means the reported `h`
/// bits are impossible for an honest device.
pub fn predict_answers(a_side: Option<&SideInput>, b_side: Option<&SideInput>) -> Result<Option<Prediction>> {
    let placeholder = StateVector::zero(1)?;
    let psi_a = a_side.map_or(&placeholder, |s| &s.psi);
    let psi_b = b_side.map_or(&placeholder, |s| &s.psi);
    let mut s = psi_a.tensor(psi_b)?.tensor(&epr())?;
    if let Some(side) = a_side {
        s.cnot(E1, A)?;
        let Some((_, post)) = s.branch(A, Basis::Computational, side.h)? else {
            return Ok(None);
        };
        s = post;
    }
    if let Some(side) = b_side {
        s.h(E2)?;
        s.cnot(E2, B)?;
        let Some((_, post)) = s.branch(B, Basis::Computational, side.h)? else {
            return Ok(None);
        };
        s = post;
        s.h(E2)?;
    }
    let x = a_side.map_or(Basis::Computational, |s| s.basis);
    let y = b_side.map_or(Basis::Computational, |s| s.basis);
    let dist = s.outcome_distribution(&[Basis::Computational, Basis::Computational, x, y])?;
    let (mut pa, mut pb, mut pp) = (0.0, 0.0, 0.0);
    for (i, p) in dist.iter().enumerate() {
        let a = (i >> (3 - E1)) & 1;
        let b = (i >> (3 - E2)) & 1;
        if a == 1 {
            pa += p;
        }
        if b == 1 {
            pb += p;
        }
        if a ^ b == 1 {
            pp += p;
        }
    }
    let fixed = |p1: f64| {
        if p1 < DETERMINISTIC_TOL {
            Some(0)
        } else if p1 > 1.0 - DETERMINISTIC_TOL {
            Some(1)
        } else {
            None
        }
    };
    Ok(Some(Prediction {
        a: a_side.and(fixed(pa)),
        b: b_side.and(fixed(pb)),
        parity: if a_side.is_some() && b_side.is_some() { fixed(pp) } else { None },
    }))
}

fn trapdoor<'a>(keys: &'a KeyRegistry, record: &RoundRecord, side: Side) -> Result<&'a Trapdoor> {
    let (id, theta) = match side {
        Side::Sender => (record.key_a, record.theta_a),
        Side::Receiver => (record.key_b, record.theta_b),
    };
    let t = keys.trapdoor(id)?;
    if t.family() != Family::for_basis(theta) {
        return Err(Error::Malformed(format!(
            "round {}: {} key is {} but the state basis is {:?}",
            record.index,
            side.name(),
            t.family().name(),
            theta
        )));
    }
    Ok(t)
}

fn missing(record: &RoundRecord, what: &str) -> Error {
    Error::Malformed(format!("round {}: missing {what}", record.index))
}

/// `f_{z_1}(z_r) = c`; wrong lengths simply fail.
fn image_check(t: &Trapdoor, c: &BitString, z: &BitString) -> bool {
    let key = t.public_key();
    if z.len() != key.domain_bits() + 1 || c.len() != key.image_bits() {
        return false;
    }
    let x = BitString::from_bits(z.iter().skip(1).collect());
    key.eval(z.bit(0), &x).is_ok_and(|y| &y == c)
}

/// State of the retained qubit after the `d` readout, or `None` when `c` has
/// no valid preimage structure.
fn retained_state(t: &Trapdoor, c: &BitString, d: &BitString) -> Option<(StateVector, Option<u8>)> {
    match t.family() {
        Family::ClawFree => {
            let v = t.hardcore_bit(c, d).ok()?;
            Some((StateVector::eigenstate(Basis::Hadamard, v), Some(v)))
        }
        Family::Injective => {
            let (b, _) = t.invert_injective(c).ok()?;
            if d.len() != t.domain_bits() {
                return None;
            }
            Some((StateVector::eigenstate(Basis::Computational, b), None))
        }
    }
}

struct SideFields<'r> {
    ct: ChallengeType,
    c: &'r BitString,
    z: Option<&'r BitString>,
    d: Option<&'r BitString>,
    basis: Option<Basis>,
    bit: Option<u8>,
    h: Option<u8>,
}

fn fields(record: &RoundRecord, side: Side) -> SideFields<'_> {
    match side {
        Side::Sender => SideFields {
            ct: record.ct_a(),
            c: &record.c_a,
            z: record.z_a.as_ref(),
            d: record.d_a.as_ref(),
            basis: record.x,
            bit: record.a_bit,
            h: record.h_a,
        },
        Side::Receiver => SideFields {
            ct: record.ct_b(),
            c: &record.c_b,
            z: record.z_b.as_ref(),
            d: record.d_b.as_ref(),
            basis: record.y,
            bit: record.b_bit,
            h: record.h_b,
        },
    }
}

/// Winning condition of one self-test round.
pub fn winning_check(record: &RoundRecord, keys: &KeyRegistry) -> Result<Verdict> {
    let mut inputs: [Option<SideInput>; 2] = [None, None];
    let mut v_bits = [None, None];
    let mut answers = [None, None];
    let mut pass = true;
    for (k, side) in [Side::Sender, Side::Receiver].into_iter().enumerate() {
        let t = trapdoor(keys, record, side)?;
        let f = fields(record, side);
        match f.ct {
            ChallengeType::A => {
                let z = f.z.ok_or_else(|| missing(record, "z"))?;
                pass &= image_check(t, f.c, z);
            }
            ChallengeType::B => {
                let d = f.d.ok_or_else(|| missing(record, "d"))?;
                let basis = f.basis.ok_or_else(|| missing(record, "basis question"))?;
                let bit = f.bit.ok_or_else(|| missing(record, "answer bit"))?;
                let h = f.h.ok_or_else(|| missing(record, "h bit"))?;
                if bit > 1 || h > 1 {
                    return Err(Error::Malformed(format!("round {}: non-binary answer", record.index)));
                }
                match retained_state(t, f.c, d) {
                    Some((psi, v)) => {
                        inputs[k] = Some(SideInput { psi, h, basis });
                        v_bits[k] = v;
                        answers[k] = Some(bit);
                    }
                    None => pass = false,
                }
            }
        }
    }
    if !pass {
        return Ok(Verdict::Fail);
    }
    if classify_round(record) == RoundType::Bell {
        let (Some(v_alpha), Some(v_beta)) = (v_bits[0], v_bits[1]) else {
            return Ok(Verdict::Fail);
        };
        return Ok(bell_rule(record.x, record.y, record.a_bit, record.b_bit, v_alpha, v_beta));
    }
    if inputs.iter().all(Option::is_none) {
        return Ok(Verdict::Pass);
    }
    Ok(match predict_answers(inputs[0].as_ref(), inputs[1].as_ref())? {
        Some(p) if p.accepts(answers[0], answers[1]) => Verdict::Pass,
        _ => Verdict::Fail,
    })
}

/// Matched computational questions check `a xor b = v_beta`, matched Hadamard
/// questions check `a xor b = v_alpha`, mismatched questions pass.
fn bell_rule(x: Option<Basis>, y: Option<Basis>, a: Option<u8>, b: Option<u8>, v_alpha: u8, v_beta: u8) -> Verdict {
    let (Some(x), Some(y), Some(a), Some(b)) = (x, y, a, b) else {
        return Verdict::Fail;
    };
    let ok = match (x, y) {
        (Basis::Computational, Basis::Computational) => a ^ b == v_beta,
        (Basis::Hadamard, Basis::Hadamard) => a ^ b == v_alpha,
        _ => true,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Correction bit of a generation round: `w_alpha = v_alpha` if `x` is
/// Hadamard, `w_beta = v_beta` if `y` is computational, 0 otherwise.
pub fn compute_corrections(record: &RoundRecord, side: Side, trapdoor: &Trapdoor) -> Result<u8> {
    let f = fields(record, side);
    let basis = f.basis.ok_or_else(|| missing(record, "basis question"))?;
    let needed = match side {
        Side::Sender => basis == Basis::Hadamard,
        Side::Receiver => basis == Basis::Computational,
    };
    if !needed {
        return Ok(0);
    }
    let d = f.d.ok_or_else(|| missing(record, "d"))?;
    trapdoor.hardcore_bit(f.c, d)
}
