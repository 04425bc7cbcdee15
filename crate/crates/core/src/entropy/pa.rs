use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hashing::{enumerate_family, sample_hash, HashFunction};
use crate::qsim::{trace_norm, CqState, C64};
use crate::rng::StreamRng;

const MAX_X_BITS: usize = 6;
const MAX_E_QUBITS: usize = 2;

/// `(1/2) 2^{-(h - q - l)/2} + 2 eps`.
pub fn pa_bound(h_smooth: f64, q: usize, l: usize, eps: f64) -> f64 {
    0.5 * 2f64.powf(-(h_smooth - q as f64 - l as f64) / 2.0) + 2.0 * eps
}

/// Which hash members the distance is averaged over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HashFamilySpec {
    Exhaustive,
    /// Members of full rank `l` only.
    FullRank,
    Sampled { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaEstimate {
    pub value: f64,
    /// Zero when the average is exact.
    pub std_error: f64,
    pub members: usize,
}

struct Block {
    xs: Vec<(u64, DMatrix<C64>)>,
    total: DMatrix<C64>,
}

/// `D(rho_{F(X) F U E}, 2^{-l} 1 (x) rho_{F U E})` for classical tuples
/// `(x, u)` (or `(x)`) and quantum register `E`.
pub fn pa_exact_lhs(state: &CqState, n: usize, l: usize, family: HashFamilySpec) -> Result<PaEstimate> {
    if n > MAX_X_BITS {
        return Err(Error::TooLarge(format!("{n}-bit X")));
    }
    if state.quantum_qubits() > MAX_E_QUBITS {
        return Err(Error::TooLarge(format!("{}-qubit E", state.quantum_qubits())));
    }
    let mut blocks: BTreeMap<u64, Block> = BTreeMap::new();
    for (tuple, p, rho) in state.branches() {
        let (x, u) = match tuple.as_slice() {
            [x] => (*x, 0),
            [x, u] => (*x, *u),
            _ => return Err(Error::Malformed("cq tuple must be (x) or (x, u)".into())),
        };
        if x >> n != 0 {
            return Err(Error::Malformed(format!("x = {x} exceeds {n} bits")));
        }
        let m = rho.to_density().matrix() * C64::new(*p, 0.0);
        let dim = m.nrows();
        let block = blocks.entry(u).or_insert_with(|| Block { xs: Vec::new(), total: DMatrix::zeros(dim, dim) });
        block.total += &m;
        block.xs.push((x, m));
    }
    let distance = |f: &HashFunction| -> Result<f64> {
        let outputs = 1usize << l;
        let scale = C64::new(1.0 / outputs as f64, 0.0);
        let mut sum = 0.0;
        for block in blocks.values() {
            let mut per_s: Vec<DMatrix<C64>> = vec![-&block.total * scale; outputs];
            for (x, m) in &block.xs {
                let s = f.apply(&BitString::from_uint(*x, n))?.to_uint() as usize;
                per_s[s] += m;
            }
            sum += per_s.iter().map(trace_norm).sum::<f64>();
        }
        Ok(0.5 * sum)
    };
    match family {
        HashFamilySpec::Exhaustive | HashFamilySpec::FullRank => {
            let members: Vec<HashFunction> = enumerate_family(n, l)?
                .into_iter()
                .filter(|f| family == HashFamilySpec::Exhaustive || f.rank() == l)
                .collect();
            let values = members.iter().map(&distance).collect::<Result<Vec<f64>>>()?;
            Ok(PaEstimate { value: values.iter().sum::<f64>() / values.len() as f64, std_error: 0.0, members: values.len() })
        }
        HashFamilySpec::Sampled { samples, seed } => {
            if samples < 2 {
                return Err(Error::Config("sampled hash family needs at least 2 members".into()));
            }
            let mut rng = StreamRng::seed_from_u64(seed);
            let values = (0..samples)
                .map(|_| distance(&sample_hash(n, l, &mut rng)?))
                .collect::<Result<Vec<f64>>>()?;
            let k = values.len() as f64;
            let mean = values.iter().sum::<f64>() / k;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(PaEstimate { value: mean, std_error: (var / k).sqrt(), members: values.len() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{QuantumState, StateVector};

    fn trivial_e() -> QuantumState {
        StateVector::zero(1).unwrap().into()
    }

    #[test]
    fn bound_arithmetic() {
        assert!((pa_bound(3.0, 0, 3, 0.0) - 0.5).abs() < 1e-15);
        assert!((pa_bound(5.0, 0, 3, 0.0) - 0.25).abs() < 1e-15);
        assert!((pa_bound(10.0, 2, 4, 0.01) - 0.145).abs() < 1e-15);
    }

    #[test]
    fn uniform_x_full_rank_slice_is_exactly_uniform() {
        let branches = (0..8).map(|x| (vec![x, 0], 1.0 / 8.0, trivial_e())).collect();
        let st = CqState::new(branches).unwrap();
        let est = pa_exact_lhs(&st, 3, 3, HashFamilySpec::FullRank).unwrap();
        assert!(est.value.abs() < 1e-12);
        assert_eq!(est.members, 168);
    }

    #[test]
    fn point_mass_single_output_bit_is_half() {
        let st = CqState::new(vec![(vec![0], 1.0, trivial_e())]).unwrap();
        let est = pa_exact_lhs(&st, 2, 1, HashFamilySpec::Exhaustive).unwrap();
        assert!((est.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampled_mean_is_close_to_exhaustive() {
        let branches = (0..4).map(|x| (vec![x], if x == 0 { 0.7 } else { 0.1 }, trivial_e())).collect();
        let st = CqState::new(branches).unwrap();
        let exact = pa_exact_lhs(&st, 2, 1, HashFamilySpec::Exhaustive).unwrap();
        let sampled = pa_exact_lhs(&st, 2, 1, HashFamilySpec::Sampled { samples: 4000, seed: 3 }).unwrap();
        assert!((exact.value - sampled.value).abs() < 5.0 * sampled.std_error + 1e-9);
    }
}
