use serde::{Deserialize, Serialize};

use super::{smooth_min_entropy, JointDistribution};
use crate::error::{Error, Result};
use crate::qsim::{Basis, QuantumState};

pub const MAX_UNCERTAINTY_QUBITS: usize = 6;

/// `exp(-lambda^2 n / (32 (2 - log lambda)^2))`.
pub fn uncertainty_epsilon(n: usize, lambda: f64) -> f64 {
    (-(lambda * lambda * n as f64) / (32.0 * (2.0 - lambda.log2()).powi(2))).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyCheck {
    pub eps: f64,
    pub h_eps: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Measures `state` in every basis string `Theta` (uniform) and compares
/// `H^eps(X|Theta)` with `(1/2 - 2 lambda) n`.
pub fn check_uncertainty_relation(state: &QuantumState, n: usize, lambda: f64) -> Result<UncertaintyCheck> {
    if n > MAX_UNCERTAINTY_QUBITS {
        return Err(Error::TooLarge(format!("{n} qubits for exhaustive basis enumeration")));
    }
    if state.qubits() != n {
        return Err(Error::QubitCount { expected: n, found: state.qubits() });
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda = {lambda} must be positive")));
    }
    let bound = (0.5 - 2.0 * lambda) * n as f64;
    let eps = uncertainty_epsilon(n, lambda);
    let dim = 1usize << n;
    let weight = 1.0 / dim as f64;
    let mut p = vec![0.0; dim * dim];
    for theta in 0..dim {
        let bases: Vec<Basis> = (0..n).map(|k| Basis::from_bit(((theta >> (n - 1 - k)) & 1) as u8)).collect();
        for (x, px) in state.outcome_distribution(&bases)?.into_iter().enumerate() {
            p[x * dim + theta] = px * weight;
        }
    }
    let d = JointDistribution::from_weights(dim, dim, p)?;
    if eps >= 1.0 {
        // nothing constrains an event of probability >= 0
        return Ok(UncertaintyCheck { eps, h_eps: f64::INFINITY, bound, holds: true });
    }
    let h_eps = smooth_min_entropy(&d, eps)?;
    Ok(UncertaintyCheck { eps, h_eps, bound, holds: bound <= 0.0 || h_eps >= bound - 1e-10 })
}
