//! Seeded, splittable randomness.
//!
//! Every stream is a ChaCha generator keyed by mixing a root seed with a path
//! of labels, so `(seed, run, round)` always names the same stream no matter
//! which thread or in which order it is consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of a tree of independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    key: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { key: seed }
    }

    /// A child node; `label` distinguishes siblings.
    pub fn child(&self, label: u64) -> SeedTree {
        let mut state = self.key ^ label.rotate_left(17);
        let a = splitmix64(&mut state);
        let b = splitmix64(&mut state);
        SeedTree { key: a ^ b.rotate_left(29) ^ label }
    }

    pub fn path(&self, labels: &[u64]) -> SeedTree {
        labels.iter().fold(*self, |node, &l| node.child(l))
    }

    pub fn rng(&self) -> StreamRng {
        let mut state = self.key;
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        StreamRng::from_seed(seed)
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Root of trial `t` of an experiment.
    pub fn trial(&self, t: usize) -> SeedTree {
        self.path(&[label::TRIAL, t as u64])
    }
}

/// Stream labels used across the crate.
pub mod label {
    pub const SENDER: u64 = 1;
    pub const RECEIVER: u64 = 2;
    pub const DEVICE_A: u64 = 3;
    pub const DEVICE_B: u64 = 4;
    pub const SOURCE: u64 = 5;
    pub const VERIFIER: u64 = 6;
    pub const TRIAL: u64 = 7;
    pub const ESTIMATION: u64 = 8;
}
