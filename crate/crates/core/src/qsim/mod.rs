//! Dense simulation of small qubit registers.

mod density;
mod fig1;
mod lab;
mod state;

pub use density::{hermitian_eigenvalues, trace_distance, trace_norm, CqState, DensityMatrix, QuantumState};
pub use fig1::{apply_fig1_circuit, fig1_branch};
pub use lab::{Lab, LabPort, QubitId, Side};
pub use state::{gate, make_bell, Basis, BellLabel, Gate, StateVector, ALGEBRAIC_TOL, C64, FIDELITY_TOL, MAX_QUBITS};
