use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for algebraic invariants (norms, traces, probability sums).
pub const ALGEBRAIC_TOL: f64 = 1e-10;

/// Two states are taken to be equal up to global phase when their fidelity
/// is at least `1 - FIDELITY_TOL`.
pub const FIDELITY_TOL: f64 = 1e-9;

/// Branch probabilities at or below this are numerical zeros.
const ZERO_PROB: f64 = 1e-24;

pub(crate) const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Computational,
    Hadamard,
}

impl Basis {
    /// `[Computational, Hadamard]_c`.
    pub fn from_bit(c: u8) -> Basis {
        if c & 1 == 0 {
            Basis::Computational
        } else {
            Basis::Hadamard
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Basis::Computational => 0,
            Basis::Hadamard => 1,
        }
    }

    pub const ALL: [Basis; 2] = [Basis::Computational, Basis::Hadamard];
}

/// Single-qubit operator as a row-major 2x2 matrix.
pub type Gate = [[C64; 2]; 2];

pub mod gate {
    use super::{Gate, C64, FRAC_1_SQRT_2};

    const O: C64 = C64::new(0.0, 0.0);
    const I: C64 = C64::new(1.0, 0.0);
    const M: C64 = C64::new(-1.0, 0.0);
    const R: C64 = C64::new(FRAC_1_SQRT_2, 0.0);
    const MR: C64 = C64::new(-FRAC_1_SQRT_2, 0.0);

    pub const IDENTITY: Gate = [[I, O], [O, I]];
    pub const X: Gate = [[O, I], [I, O]];
    pub const Z: Gate = [[I, O], [O, M]];
    pub const H: Gate = [[R, R], [R, MR]];
}

/// A pure state of `qubits` qubits. Qubit 0 is the leftmost tensor factor,
/// i.e. the most significant bit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(qubits: usize) -> Result<Self> {
        Self::basis_state(qubits, 0)
    }

    pub fn basis_state(qubits: usize, index: usize) -> Result<Self> {
        check_size(qubits)?;
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(Error::InvalidState(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    /// Validates length and unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let state = Self::from_amplitudes_unchecked(amps)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Validates the length and rescales to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let mut state = Self::from_amplitudes_unchecked(amps)?;
        let norm = state.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        state.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(state)
    }

    fn from_amplitudes_unchecked(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!("length {dim} is not a power of two")));
        }
        let qubits = dim.trailing_zeros() as usize;
        check_size(qubits)?;
        Ok(Self { qubits, amps })
    }

    /// |+>
    pub fn plus() -> Self {
        Self { qubits: 1, amps: vec![C64::new(FRAC_1_SQRT_2, 0.0); 2] }
    }

    /// |->
    /// Haar-random pure state from normalized complex Gaussians.
    pub fn haar_random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Result<Self> {
        check_size(qubits)?;
        let amps = (0..1usize << qubits)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(amps)
    }

    pub fn minus() -> Self {
        Self { qubits: 1, amps: vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)] }
    }

    /// The eigenstate of `basis` with eigen-outcome `bit`.
    pub fn eigenstate(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Computational, b) => Self::basis_state(1, b as usize).expect("one qubit"),
            (Basis::Hadamard, 0) => Self::plus(),
            (Basis::Hadamard, _) => Self::minus(),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(self.dim(), other.dim()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        check_size(self.qubits + other.qubits)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { qubits: self.qubits + other.qubits, amps })
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.qubits {
            return Err(Error::QubitIndex { index, count: self.qubits });
        }
        Ok(())
    }

    fn mask(&self, index: usize) -> usize {
        1 << (self.qubits - 1 - index)
    }

    pub fn apply(&mut self, index: usize, g: &Gate) -> Result<()> {
        self.check_index(index)?;
        let mask = self.mask(index);
        for i in 0..self.dim() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amps[j] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn h(&mut self, index: usize) -> Result<()> {
        self.apply(index, &gate::H)
    }

    pub fn x(&mut self, index: usize) -> Result<()> {
        self.apply(index, &gate::X)
    }

    pub fn z(&mut self, index: usize) -> Result<()> {
        self.apply(index, &gate::Z)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_pair(control, target)?;
        let (cm, tm) = (self.mask(control), self.mask(target));
        for i in 0..self.dim() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        Ok(())
    }

    pub fn cz(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        let (am, bm) = (self.mask(a), self.mask(b));
        for i in 0..self.dim() {
            if i & am != 0 && i & bm != 0 {
                self.amps[i] = -self.amps[i];
            }
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a == b {
            return Err(Error::InvalidState(format!("two-qubit gate on qubit {a} twice")));
        }
        Ok(())
    }

    fn rotated_into(&self, index: usize, basis: Basis) -> Result<StateVector> {
        let mut s = self.clone();
        if basis == Basis::Hadamard {
            s.h(index)?;
        }
        Ok(s)
    }

    /// Probability of outcome 1 when measuring `index` in `basis`.
    pub fn prob_one(&self, index: usize, basis: Basis) -> Result<f64> {
        self.check_index(index)?;
        let s = self.rotated_into(index, basis)?;
        let mask = s.mask(index);
        Ok(s.amps.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Post-measurement state for a fixed outcome, with its probability.
    /// Returns `None` for a zero-probability branch. The measured qubit stays
    /// in the register, in the eigenstate of `basis`.
    pub fn branch(&self, index: usize, basis: Basis, outcome: u8) -> Result<Option<(f64, StateVector)>> {
        let mut s = self.rotated_into(index, basis)?;
        let mask = s.mask(index);
        let want = outcome & 1 == 1;
        let mut p = 0.0;
        for (i, a) in s.amps.iter_mut().enumerate() {
            if (i & mask != 0) == want {
                p += a.norm_sqr();
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        if p <= ZERO_PROB {
            return Ok(None);
        }
        let scale = p.sqrt();
        s.amps.iter_mut().for_each(|a| *a /= scale);
        if basis == Basis::Hadamard {
            s.h(index)?;
        }
        Ok(Some((p, s)))
    }

    /// Projective measurement of one qubit. Outcome 0 is selected when
    /// `sample < Pr[0]`.
    pub fn measure(&self, index: usize, basis: Basis, sample: f64) -> Result<(u8, StateVector)> {
        let p1 = self.prob_one(index, basis)?;
        let mut outcome = u8::from(sample >= 1.0 - p1);
        let post = match self.branch(index, basis, outcome)? {
            Some((_, post)) => post,
            None => {
                // rounding put the sample on a zero-probability side
                outcome ^= 1;
                self.branch(index, basis, outcome)?.expect("one branch is nonzero").1
            }
        };
        Ok((outcome, post))
    }

    /// Measures one qubit and removes it from the register.
    pub fn measure_discard(&self, index: usize, basis: Basis, sample: f64) -> Result<(u8, StateVector)> {
        let (outcome, post) = self.measure(index, basis, sample)?;
        Ok((outcome, post.remove_qubit(index, basis, outcome)))
    }

    /// Drops a qubit known to be in the given eigenstate (product with the rest).
    fn remove_qubit(&self, index: usize, basis: Basis, outcome: u8) -> StateVector {
        let mut s = self.rotated_into(index, basis).expect("index checked");
        let mask = s.mask(index);
        let want = outcome & 1 == 1;
        let low = mask - 1;
        let amps: Vec<C64> = (0..self.dim() / 2)
            .map(|k| {
                let i = ((k & !low) << 1) | (k & low) | if want { mask } else { 0 };
                s.amps[i]
            })
            .collect();
        s.amps = amps;
        s.qubits -= 1;
        s
    }

    /// Removes qubits that have been measured in the computational basis and are
    /// known to hold `bits` (leftmost listed first).
    pub fn project_out(&self, indices: &[usize], bits: &[u8]) -> Result<StateVector> {
        let mut order: Vec<(usize, u8)> = indices.iter().copied().zip(bits.iter().copied()).collect();
        order.sort_by(|a, b| b.0.cmp(&a.0));
        let mut s = self.clone();
        for (index, bit) in order {
            s.check_index(index)?;
            s = s.remove_qubit(index, Basis::Computational, bit);
        }
        Ok(s)
    }

    /// Probability of every outcome string when qubit `k` is measured in
    /// `bases[k]`. Entry `i` is the string whose qubit-0 bit is the most
    /// significant bit of `i`.
    pub fn outcome_distribution(&self, bases: &[Basis]) -> Result<Vec<f64>> {
        if bases.len() != self.qubits {
            return Err(Error::QubitCount { expected: self.qubits, found: bases.len() });
        }
        let mut s = self.clone();
        for (k, b) in bases.iter().enumerate() {
            if *b == Basis::Hadamard {
                s.h(k)?;
            }
        }
        Ok(s.amps.iter().map(|a| a.norm_sqr()).collect())
    }
}

pub(crate) fn check_size(qubits: usize) -> Result<()> {
    if qubits > MAX_QUBITS {
        return Err(Error::RegisterTooLarge { qubits, max: MAX_QUBITS });
    }
    Ok(())
}

/// Label of one of the four Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellLabel {
    pub v_alpha: u8,
    pub v_beta: u8,
}

impl BellLabel {
    pub fn new(v_alpha: u8, v_beta: u8) -> Result<Self> {
        if v_alpha > 1 || v_beta > 1 {
            return Err(Error::InvalidState(format!("Bell label bits ({v_alpha}, {v_beta}) must be 0 or 1")));
        }
        Ok(Self { v_alpha, v_beta })
    }

    pub fn all() -> [BellLabel; 4] {
        [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(a, b)| BellLabel { v_alpha: a, v_beta: b })
    }
}

/// `(Z^{v_alpha} X^{v_beta} (x) 1)(|00> + |11>)/sqrt 2`.
pub fn make_bell(label: BellLabel) -> StateVector {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let o = C64::new(0.0, 0.0);
    let mut s = StateVector { qubits: 2, amps: vec![r, o, o, r] };
    if label.v_beta == 1 {
        s.x(0).expect("two qubits");
    }
    if label.v_alpha == 1 {
        s.z(0).expect("two qubits");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn bell_states_match_closed_forms() {
        let r = FRAC_1_SQRT_2;
        let phi00 = make_bell(BellLabel::new(0, 0).unwrap());
        assert_eq!(phi00.amplitudes(), &[c(r), c(0.0), c(0.0), c(r)]);
        let phi10 = make_bell(BellLabel::new(1, 0).unwrap());
        assert_eq!(phi10.amplitudes(), &[c(r), c(0.0), c(0.0), c(-r)]);
        let phi01 = make_bell(BellLabel::new(0, 1).unwrap());
        assert_eq!(phi01.amplitudes(), &[c(0.0), c(r), c(r), c(0.0)]);
        assert!(BellLabel::new(2, 0).is_err());
    }

    #[test]
    fn measuring_bell_first_qubit() {
        let phi = make_bell(BellLabel::new(0, 0).unwrap());
        assert!((phi.prob_one(0, Basis::Computational).unwrap() - 0.5).abs() < ALGEBRAIC_TOL);
        let (o0, post0) = phi.measure(0, Basis::Computational, 0.2).unwrap();
        let (o1, post1) = phi.measure(0, Basis::Computational, 0.7).unwrap();
        assert_eq!((o0, o1), (0, 1));
        assert!(post0.fidelity(&StateVector::basis_state(2, 0b00).unwrap()).unwrap() > 1.0 - FIDELITY_TOL);
        assert!(post1.fidelity(&StateVector::basis_state(2, 0b11).unwrap()).unwrap() > 1.0 - FIDELITY_TOL);
    }

    #[test]
    fn plus_is_hadamard_eigenstate() {
        let plus = StateVector::plus();
        for sample in [0.0, 0.5, 0.999_999] {
            assert_eq!(plus.measure(0, Basis::Hadamard, sample).unwrap().0, 0);
        }
        assert!(plus.prob_one(0, Basis::Hadamard).unwrap().abs() < ALGEBRAIC_TOL);
    }

    #[test]
    fn hadamard_parity_of_phi10() {
        let phi = make_bell(BellLabel::new(1, 0).unwrap());
        for sample in [0.1, 0.6, 0.9] {
            let (a, post) = phi.measure(0, Basis::Hadamard, sample).unwrap();
            for s2 in [0.05, 0.5, 0.95] {
                let (b, _) = post.measure(1, Basis::Hadamard, s2).unwrap();
                assert_eq!(a ^ b, 1);
            }
        }
    }

    #[test]
    fn measure_discard_keeps_the_partner() {
        let phi = make_bell(BellLabel::new(0, 1).unwrap());
        let (a, rest) = phi.measure_discard(0, Basis::Computational, 0.3).unwrap();
        assert_eq!(rest.qubits(), 1);
        // |10> + |01>: partner holds the complement
        let expect = StateVector::basis_state(1, (1 - a) as usize).unwrap();
        assert!(rest.fidelity(&expect).unwrap() > 1.0 - FIDELITY_TOL);
    }

    #[test]
    fn errors_on_bad_indices() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(s.measure(2, Basis::Computational, 0.5), Err(Error::QubitIndex { .. })));
        assert!(s.outcome_distribution(&[Basis::Hadamard]).is_err());
        assert!(StateVector::zero(MAX_QUBITS + 1).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0), c(1.0)]).is_err());
    }

    #[test]
    fn outcome_distribution_examples() {
        let phi = make_bell(BellLabel::new(0, 0).unwrap());
        let cc = phi.outcome_distribution(&[Basis::Computational, Basis::Computational]).unwrap();
        assert_eq!(cc.len(), 4);
        for (i, expected) in [0.5, 0.0, 0.0, 0.5].iter().enumerate() {
            assert!((cc[i] - expected).abs() < ALGEBRAIC_TOL);
        }
        let ch = phi.outcome_distribution(&[Basis::Computational, Basis::Hadamard]).unwrap();
        assert!(ch.iter().all(|p| (p - 0.25).abs() < ALGEBRAIC_TOL));
        let zero = StateVector::zero(1).unwrap();
        let h = zero.outcome_distribution(&[Basis::Hadamard]).unwrap();
        assert!(h.iter().all(|p| (p - 0.5).abs() < ALGEBRAIC_TOL));
    }
}
