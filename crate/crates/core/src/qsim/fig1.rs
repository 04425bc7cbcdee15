//! Controlled-Z replacement using one EPR pair and local operations.
//!
//! Wires are ordered `[A, B, e1, e2]` internally; `(e1, e2)` carry the output.

use super::state::{Basis, StateVector, FRAC_1_SQRT_2, C64};
use crate::error::{Error, Result};

const A: usize = 0;
const B: usize = 1;
const E1: usize = 2;
const E2: usize = 3;

fn epr() -> StateVector {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    StateVector::from_amplitudes(vec![r, z, z, r]).expect("normalized")
}

fn circuit_before_measurement(state: &StateVector) -> Result<StateVector> {
    if state.qubits() != 2 {
        return Err(Error::QubitCount { expected: 2, found: state.qubits() });
    }
    let mut s = state.tensor(&epr())?;
    s.h(E2)?;
    s.cnot(E1, A)?;
    s.cnot(E2, B)?;
    Ok(s)
}

/// Runs the circuit, sampling `h_a` with `samples[0]` and `h_b` with `samples[1]`.
pub fn apply_fig1_circuit(state: &StateVector, samples: [f64; 2]) -> Result<(u8, u8, StateVector)> {
    let s = circuit_before_measurement(state)?;
    let (h_a, s) = s.measure_discard(A, Basis::Computational, samples[0])?;
    // B has shifted to index 0
    let (h_b, s) = s.measure_discard(B - 1, Basis::Computational, samples[1])?;
    Ok((h_a, h_b, s))
}

/// Probability of the `(h_a, h_b)` branch and its normalized output state.
pub fn fig1_branch(state: &StateVector, h_a: u8, h_b: u8) -> Result<Option<(f64, StateVector)>> {
    let s = circuit_before_measurement(state)?;
    let Some((pa, s)) = s.branch(A, Basis::Computational, h_a)? else {
        return Ok(None);
    };
    let Some((pb, s)) = s.branch(B, Basis::Computational, h_b)? else {
        return Ok(None);
    };
    let out = s.project_out(&[A, B], &[h_a & 1, h_b & 1])?;
    Ok(Some((pa * pb, out)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::FIDELITY_TOL;

    fn closed_form(state: &StateVector, h_a: u8, h_b: u8) -> StateVector {
        let mut s = state.clone();
        s.cz(0, 1).unwrap();
        if h_b == 1 {
            s.z(0).unwrap();
        }
        if h_a == 1 {
            s.x(0).unwrap();
            s.z(1).unwrap();
        }
        if h_b == 1 {
            s.x(1).unwrap();
        }
        s
    }

    #[test]
    fn basis_inputs_all_branches() {
        for i in 0..4 {
            let input = StateVector::basis_state(2, i).unwrap();
            let mut total = 0.0;
            for h_a in 0..2 {
                for h_b in 0..2 {
                    let (p, out) = fig1_branch(&input, h_a, h_b).unwrap().unwrap();
                    total += p;
                    let f = out.fidelity(&closed_form(&input, h_a, h_b)).unwrap();
                    assert!(f >= 1.0 - FIDELITY_TOL, "input {i} branch {h_a}{h_b}: {f}");
                }
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_run_matches_branch() {
        let input = StateVector::plus().tensor(&StateVector::plus()).unwrap();
        let (h_a, h_b, out) = apply_fig1_circuit(&input, [0.3, 0.8]).unwrap();
        let f = out.fidelity(&closed_form(&input, h_a, h_b)).unwrap();
        assert!(f >= 1.0 - FIDELITY_TOL);
        assert!(apply_fig1_circuit(&StateVector::plus(), [0.1, 0.1]).is_err());
    }
}
