//! Randomized numerical checks of the entropy inequalities on small instances.
//! Each suite draws its instances from one seeded stream and counts violations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_chain_rule, check_uncertainty_relation, pa_bound, pa_exact_lhs, smooth_min_entropy, split_bound, split_choice_bit, HashFamilySpec,
    JointDistribution, SplitInput,
};
use crate::error::Result;
use crate::qsim::{Basis, CqState, DensityMatrix, QuantumState, StateVector};
use crate::rng::{SeedTree, StreamRng};

/// Slack granted to floating comparisons.
const TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `bound side - checked side` seen; negative means a violation.
    pub worst_margin: f64,
}

impl SuiteReport {
    fn new(name: &str, seed: u64) -> Self {
        Self { name: name.to_string(), seed, instances: 0, violations: 0, worst_margin: f64::INFINITY }
    }

    fn push(&mut self, margin: f64, holds: bool) {
        self.instances += 1;
        self.violations += usize::from(!holds);
        self.worst_margin = self.worst_margin.min(margin);
    }
}

fn stream(seed: u64, suite: u64) -> StreamRng {
    SeedTree::new(seed).child(suite).rng()
}

/// Skewed random weights; cubing spreads the mass so min-entropies vary.
fn weights(rng: &mut StreamRng, cells: usize, zero_fraction: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..cells).map(|_| if rng.random_bool(zero_fraction) { 0.0 } else { rng.random::<f64>().powi(3) }).collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..cells)] = 1.0;
    }
    w
}

/// Chain rule on random `(X, Y)` tables with 4-bit `X`.
pub fn chain_rule_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 1);
    let mut report = SuiteReport::new("chain_rule", seed);
    for _ in 0..count {
        let ny = rng.random_range(1..=4);
        let d = JointDistribution::from_weights(16, ny, weights(&mut rng, 16 * ny, 0.2))?;
        let eps = rng.random_range(0.001..0.2);
        let eps_prime = rng.random_range(0.001..0.5);
        let c = check_chain_rule(&d, eps, eps_prime)?;
        report.push(c.lhs - c.rhs, c.holds);
    }
    Ok(report)
}

fn random_state(rng: &mut StreamRng, qubits: usize) -> Result<QuantumState> {
    Ok(match rng.random_range(0..3) {
        0 => StateVector::haar_random(qubits, rng)?.into(),
        1 => {
            // product of BB84 states, where the relation is tightest
            let mut s = StateVector::eigenstate(Basis::from_bit(rng.random_range(0..2)), rng.random_range(0..2));
            for _ in 1..qubits {
                s = s.tensor(&StateVector::eigenstate(Basis::from_bit(rng.random_range(0..2)), rng.random_range(0..2)))?;
            }
            s.into()
        }
        _ => {
            let parts = (0..3).map(|_| Ok((rng.random::<f64>() + 0.01, StateVector::haar_random(qubits, rng)?))).collect::<Result<Vec<_>>>()?;
            let total: f64 = parts.iter().map(|p| p.0).sum();
            DensityMatrix::mixture(&parts.into_iter().map(|(w, s)| (w / total, s)).collect::<Vec<_>>())?.into()
        }
    })
}

/// Uncertainty relation for random 4-qubit states measured in random BB84 bases.
pub fn uncertainty_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 2);
    let mut report = SuiteReport::new("uncertainty", seed);
    for _ in 0..count {
        let state = random_state(&mut rng, 4)?;
        let lambda = rng.random_range(0.01..0.25);
        let c = check_uncertainty_relation(&state, 4, lambda)?;
        let margin = if c.h_eps.is_finite() { c.h_eps - c.bound } else { f64::MAX };
        report.push(margin, c.holds);
    }
    Ok(report)
}

/// Privacy amplification on random cq-states with 4-bit `X`, a 1-bit
/// classical `U`, `l = 2` output bits and `q` qubits of `E` cycling
/// through 0, 1, 2 (a constant qubit stands in for `q = 0`).
pub fn privacy_amplification_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    const N: usize = 4;
    const L: usize = 2;
    let mut rng = stream(seed, 3);
    let mut report = SuiteReport::new("privacy_amplification", seed);
    for k in 0..count {
        let q = k % 3;
        let w = weights(&mut rng, 32, 0.3);
        let total: f64 = w.iter().sum();
        let mut branches = Vec::new();
        let mut table = vec![0.0; 32];
        for (cell, &p) in w.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (x, u) = (cell / 2, cell % 2);
            let e = if q == 0 { StateVector::zero(1)?.into() } else { random_state(&mut rng, q)? };
            branches.push((vec![x as u64, u as u64], p / total, e));
            table[x * 2 + u] = p / total;
        }
        let state = CqState::new(branches)?;
        let eps = rng.random_range(0.0..0.1);
        let h = smooth_min_entropy(&JointDistribution::new(16, 2, table)?, eps)?;
        let lhs = pa_exact_lhs(&state, N, L, HashFamilySpec::Exhaustive)?.value;
        let bound = pa_bound(h, q, L, eps);
        report.push(bound - lhs, lhs <= bound + TOL);
    }
    Ok(report)
}

/// Min-entropy splitting on random `(X0, X1, Z)` with binary-pair alphabets.
/// Each instance checks the threshold witness and, by brute force over every
/// choice map, that some map meets the bound.
pub fn split_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 4);
    let mut report = SuiteReport::new("split", seed);
    for _ in 0..count {
        let nz = rng.random_range(1..=3);
        let input = SplitInput::new(2, 2, JointDistribution::from_weights(4, nz, weights(&mut rng, 4 * nz, 0.1))?)?;
        let eps = rng.random_range(0.0..0.05);
        let eps_prime = rng.random_range(0.25..0.5);
        let alpha = smooth_min_entropy(&input.table, eps)?;
        let witness = split_choice_bit(&input, alpha, eps, eps_prime)?;
        let bound = split_bound(alpha, eps_prime);
        let mut best = f64::NEG_INFINITY;
        for map in 0..1usize << nz {
            let c: Vec<u8> = (0..nz).map(|z| (map >> z & 1) as u8).collect();
            best = best.max(smooth_min_entropy(&input.selected(&c), eps + eps_prime)?);
        }
        let margin = (witness.achieved - bound).min(best - bound);
        report.push(margin, witness.holds && best >= bound - TOL);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_clean_and_reproducible() {
        let a = chain_rule_suite(100, 1).unwrap();
        assert_eq!((a.instances, a.violations), (100, 0), "{a:?}");
        assert_eq!(a, chain_rule_suite(100, 1).unwrap());
        let b = uncertainty_suite(20, 1).unwrap();
        assert_eq!(b.violations, 0, "{b:?}");
        let c = privacy_amplification_suite(9, 1).unwrap();
        assert_eq!(c.violations, 0, "{c:?}");
        let d = split_suite(60, 1).unwrap();
        assert_eq!(d.violations, 0, "{d:?}");
    }
}
