//! Device-independent randomized 1-2 oblivious transfer at desk scale.

pub mod adversary;
pub mod bits;
pub mod entcf;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod protocols;
pub mod qsim;
pub mod rng;

pub use bits::BitString;
pub use error::{Error, Result};
