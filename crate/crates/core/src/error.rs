use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected a bit string of at most {expected} bits, found {found}")]
    Length { expected: usize, found: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("qubit index {index} out of range for a {count}-qubit register")]
    QubitIndex { index: usize, count: usize },
    #[error("expected a {expected}-qubit state, found {found} qubits")]
    QubitCount { expected: usize, found: usize },
    #[error("register of {qubits} qubits exceeds the simulator limit of {max}")]
    RegisterTooLarge { qubits: usize, max: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("domain bits {0} outside the supported range 2..=10")]
    DomainBits(usize),
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("trapdoor belongs to the {found} family, operation needs {expected}")]
    WrongFamily { expected: &'static str, found: &'static str },
    #[error("value {0:#x} is not in the image of the key")]
    NotInImage(u64),
    #[error("hash output length {l} must satisfy 1 <= l <= n = {n}")]
    HashShape { n: usize, l: usize },
    #[error("smoothing parameter {0} must lie in [0, 1)")]
    Smoothing(f64),
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("input too large for exact computation: {0}")]
    TooLarge(String),
    #[error("protocol violation by {party}: {reason}")]
    Protocol { party: &'static str, reason: String },
    #[error("parameter relation violated: {0}")]
    Config(String),
    #[error("receiver holds {live} unmeasured qubits at the storage checkpoint, capacity is {capacity}")]
    StorageExceeded { live: usize, capacity: usize },
    #[error("qubit {qubit} is not owned by {side}")]
    Ownership { qubit: usize, side: &'static str },
    #[error("transcript version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("replay mismatch at {field}: recorded {recorded}, recomputed {recomputed}")]
    ReplayMismatch { field: String, recorded: String, recomputed: String },
    #[error("malformed record: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
