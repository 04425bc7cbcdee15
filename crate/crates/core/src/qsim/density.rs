use nalgebra::{DMatrix, SymmetricEigen};

use super::state::{check_size, gate, Basis, Gate, StateVector, ALGEBRAIC_TOL, C64};
use crate::error::{Error, Result};

/// A density operator on `qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim {
            return Err(Error::Dimension(dim, matrix.ncols()));
        }
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
        }
        let qubits = dim.trailing_zeros() as usize;
        check_size(qubits)?;
        Ok(Self { qubits, matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = DMatrix::from_column_slice(state.dim(), 1, state.amplitudes());
        let matrix = &v * v.adjoint();
        Self { qubits: state.qubits(), matrix }
    }

    /// `sum_i p_i |psi_i><psi_i|`.
    pub fn mixture(parts: &[(f64, StateVector)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptySupport)?;
        let dim = first.1.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        for (p, s) in parts {
            if s.dim() != dim {
                return Err(Error::Dimension(dim, s.dim()));
            }
            matrix += DensityMatrix::from_pure(s).matrix * C64::new(*p, 0.0);
        }
        DensityMatrix::new(matrix)
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        check_size(qubits)?;
        let dim = 1usize << qubits;
        let matrix = DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Ok(Self { qubits, matrix })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn validate(&self) -> Result<()> {
        let herm_gap = (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_gap > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (gap {herm_gap:e})")));
        }
        if (self.trace() - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("trace {} differs from 1", self.trace())));
        }
        let min_eig = hermitian_eigenvalues(&self.matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    fn embedded(&self, index: usize, g: &Gate) -> Result<DMatrix<C64>> {
        if index >= self.qubits {
            return Err(Error::QubitIndex { index, count: self.qubits });
        }
        Ok(embed_gate(g, index, self.qubits))
    }

    pub fn apply(&mut self, index: usize, g: &Gate) -> Result<()> {
        let u = self.embedded(index, g)?;
        self.matrix = &u * &self.matrix * u.adjoint();
        Ok(())
    }

    /// `(p, rho_post)` for one outcome of measuring `index` in `basis`; the
    /// measured qubit stays in the register.
    pub fn branch(&self, index: usize, basis: Basis, outcome: u8) -> Result<Option<(f64, DensityMatrix)>> {
        let mut proj = gate::IDENTITY;
        let (keep, drop) = if outcome & 1 == 0 { (0, 1) } else { (1, 0) };
        proj[drop][drop] = C64::new(0.0, 0.0);
        proj[keep][keep] = C64::new(1.0, 0.0);
        let mut p_full = self.embedded(index, &proj)?;
        if basis == Basis::Hadamard {
            let h = self.embedded(index, &gate::H)?;
            p_full = &h * p_full * &h;
        }
        let post = &p_full * &self.matrix * &p_full;
        let p = post.trace().re;
        if p <= 1e-24 {
            return Ok(None);
        }
        let matrix = post * C64::new(1.0 / p, 0.0);
        Ok(Some((p, DensityMatrix { qubits: self.qubits, matrix })))
    }

    pub fn measure(&self, index: usize, basis: Basis, sample: f64) -> Result<(u8, DensityMatrix)> {
        let p0 = self.branch(index, basis, 0)?.map_or(0.0, |b| b.0);
        let mut outcome = u8::from(sample >= p0);
        let post = match self.branch(index, basis, outcome)? {
            Some((_, post)) => post,
            None => {
                outcome ^= 1;
                self.branch(index, basis, outcome)?.expect("one branch is nonzero").1
            }
        };
        Ok((outcome, post))
    }

    pub fn outcome_distribution(&self, bases: &[Basis]) -> Result<Vec<f64>> {
        if bases.len() != self.qubits {
            return Err(Error::QubitCount { expected: self.qubits, found: bases.len() });
        }
        let mut rho = self.clone();
        for (k, b) in bases.iter().enumerate() {
            if *b == Basis::Hadamard {
                rho.apply(k, &gate::H)?;
            }
        }
        Ok((0..rho.dim()).map(|i| rho.matrix[(i, i)].re.max(0.0)).collect())
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        check_size(self.qubits + other.qubits)?;
        Ok(DensityMatrix { qubits: self.qubits + other.qubits, matrix: self.matrix.kronecker(&other.matrix) })
    }
}

/// The 2^n x 2^n operator acting as `g` on qubit `index`.
pub(crate) fn embed_gate(g: &Gate, index: usize, qubits: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(2, 2, |r, c| g[r][c]);
    let left = DMatrix::<C64>::identity(1 << index, 1 << index);
    let right_n = qubits - 1 - index;
    let right = DMatrix::<C64>::identity(1 << right_n, 1 << right_n);
    left.kronecker(&g).kronecker(&right)
}

/// Real eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    // symmetrize to remove rounding asymmetry before the Hermitian solver
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// `tr|A|` of a Hermitian operator.
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).iter().map(|e| e.abs()).sum()
}

/// `D(rho, sigma) = (1/2) tr|rho - sigma|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(rho.dim(), sigma.dim()));
    }
    Ok((0.5 * trace_norm(&(&rho.matrix - &sigma.matrix))).clamp(0.0, 1.0))
}

/// Either representation of a register.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.qubits(),
            QuantumState::Mixed(r) => r.qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => DensityMatrix::from_pure(s),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    pub fn measure_qubit(&self, index: usize, basis: Basis, sample: f64) -> Result<(u8, QuantumState)> {
        match self {
            QuantumState::Pure(s) => s.measure(index, basis, sample).map(|(o, p)| (o, QuantumState::Pure(p))),
            QuantumState::Mixed(r) => r.measure(index, basis, sample).map(|(o, p)| (o, QuantumState::Mixed(p))),
        }
    }

    pub fn outcome_distribution(&self, bases: &[Basis]) -> Result<Vec<f64>> {
        match self {
            QuantumState::Pure(s) => s.outcome_distribution(bases),
            QuantumState::Mixed(r) => r.outcome_distribution(bases),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

/// Classical-quantum state `sum_x P(x) |x><x| (x) rho_x`.
#[derive(Clone, Debug)]
pub struct CqState {
    branches: Vec<(Vec<u64>, f64, QuantumState)>,
}

impl CqState {
    pub fn new(branches: Vec<(Vec<u64>, f64, QuantumState)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::EmptySupport);
        }
        let total: f64 = branches.iter().map(|b| b.1).sum();
        if (total - 1.0).abs() > ALGEBRAIC_TOL || branches.iter().any(|b| b.1 < 0.0) {
            return Err(Error::InvalidDistribution(format!("branch probabilities sum to {total}")));
        }
        let dim = branches[0].2.qubits();
        let arity = branches[0].0.len();
        let mut seen = std::collections::HashSet::new();
        for (tuple, _, state) in &branches {
            if state.qubits() != dim {
                return Err(Error::Dimension(dim, state.qubits()));
            }
            if tuple.len() != arity {
                return Err(Error::Malformed("classical tuples of differing arity".into()));
            }
            if !seen.insert(tuple.clone()) {
                return Err(Error::Malformed(format!("duplicate classical value {tuple:?}")));
            }
        }
        Ok(Self { branches })
    }

    pub fn branches(&self) -> &[(Vec<u64>, f64, QuantumState)] {
        &self.branches
    }

    pub fn quantum_qubits(&self) -> usize {
        self.branches[0].2.qubits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::FRAC_1_SQRT_2;

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::from_pure(&StateVector::zero(1).unwrap());
        let one = DensityMatrix::from_pure(&StateVector::basis_state(1, 1).unwrap());
        let plus = DensityMatrix::from_pure(&StateVector::plus());
        assert!(trace_distance(&zero, &zero).unwrap().abs() < ALGEBRAIC_TOL);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < ALGEBRAIC_TOL);
        assert!((trace_distance(&zero, &plus).unwrap() - FRAC_1_SQRT_2).abs() < ALGEBRAIC_TOL);
        let two = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(trace_distance(&zero, &two), Err(Error::Dimension(2, 4))));
    }

    #[test]
    fn rejects_invalid_density() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]));
        assert!(DensityMatrix::new(m).is_err());
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.5, 0.0), C64::new(0.4, 0.0)]));
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn mixed_measurement_matches_pure() {
        let s = crate::qsim::make_bell(crate::qsim::BellLabel::new(1, 1).unwrap());
        let rho = DensityMatrix::from_pure(&s);
        for b in Basis::ALL {
            let pd = s.outcome_distribution(&[b, b]).unwrap();
            let md = rho.outcome_distribution(&[b, b]).unwrap();
            for (x, y) in pd.iter().zip(&md) {
                assert!((x - y).abs() < ALGEBRAIC_TOL);
            }
        }
        let (o, post) = rho.measure(0, Basis::Hadamard, 0.9).unwrap();
        assert!((post.trace() - 1.0).abs() < ALGEBRAIC_TOL);
        let (o2, _) = post.measure(1, Basis::Hadamard, 0.1).unwrap();
        assert_eq!(o ^ o2, 1);
    }

    #[test]
    fn cq_state_validation() {
        let z: QuantumState = StateVector::zero(1).unwrap().into();
        assert!(CqState::new(vec![(vec![0], 0.5, z.clone()), (vec![1], 0.5, z.clone())]).is_ok());
        assert!(CqState::new(vec![(vec![0], 0.5, z.clone()), (vec![0], 0.5, z.clone())]).is_err());
        assert!(CqState::new(vec![(vec![0], 0.4, z.clone())]).is_err());
    }
}
