//! Protocol state machines: Bell-pair Rand 1-2 OT, the self-test rounds, and
//! the device-independent Rand 1-2 OT built from them.

mod check;
mod config;
pub mod device;
mod ot1;
mod ot4;
mod replay;
mod selftest;
pub mod transcript;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::entcf::{ChallengeType, KeyId};
use crate::qsim::Basis;

pub use check::{classify_round, compute_corrections, predict_answers, winning_check, Prediction};
pub use config::{chernoff_confidence, generation_probability, ProtocolConfig, Relation, RelationReport};
pub use ot1::{run_protocol1, Protocol1Options, Protocol1Run, ReceiverPolicy, ReceiverStrategy, SourceKind};
pub use ot4::{run_protocol4, Protocol4Options, Protocol4Run, SenderScript};
pub use replay::{replay, ReplayVerdict};
pub use selftest::{
    estimate_delta, run_selftest_round, DeltaEstimate, SelfTestGame, SelfTestMode, SyntheticGame,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundType {
    Bell,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundTag {
    Test,
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Everything recorded about one self-test round.
///
/// Each side carries either `z` (challenge type a) or `d`, a basis question,
/// an answer bit and an `h` bit (challenge type b), never both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub theta_a: Basis,
    pub theta_b: Basis,
    pub key_a: KeyId,
    pub key_b: KeyId,
    pub c_a: BitString,
    pub c_b: BitString,
    pub ct: ChallengeType,
    /// Bob's challenge type when the two verifiers chose independently.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ct_b: Option<ChallengeType>,
    pub z_a: Option<BitString>,
    pub z_b: Option<BitString>,
    pub d_a: Option<BitString>,
    pub d_b: Option<BitString>,
    pub x: Option<Basis>,
    pub y: Option<Basis>,
    pub a_bit: Option<u8>,
    pub b_bit: Option<u8>,
    pub h_a: Option<u8>,
    pub h_b: Option<u8>,
    pub rt: RoundType,
    pub t: Option<RoundTag>,
    pub in_i: bool,
    pub w: Option<Verdict>,
}

impl RoundRecord {
    pub fn ct_a(&self) -> ChallengeType {
        self.ct
    }

    pub fn ct_b(&self) -> ChallengeType {
        self.ct_b.unwrap_or(self.ct)
    }
}

/// Index sets of a device-independent run. `tilde_i_0` and `tilde_i_1`
/// partition `tilde_i` by the sender's basis question.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    pub i: Vec<usize>,
    pub tilde_i: Vec<usize>,
    pub tilde_i_0: Vec<usize>,
    pub tilde_i_1: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtOutcome {
    pub aborted: bool,
    pub s0: Option<BitString>,
    pub s1: Option<BitString>,
    pub receiver_output: Option<BitString>,
    pub choice_bit: u8,
    pub index_sets: IndexSets,
}

impl OtOutcome {
    /// `Y = S_C` on a completed run.
    pub fn correct(&self) -> bool {
        if self.aborted {
            return false;
        }
        let target = if self.choice_bit == 0 { &self.s0 } else { &self.s1 };
        matches!((target, &self.receiver_output), (Some(s), Some(y)) if s == y)
    }
}

/// `I_r = {i : bases[i] = [Computational, Hadamard]_r}` restricted to `within`.
pub(crate) fn split_by_basis(within: &[usize], bases: &[Basis]) -> (Vec<usize>, Vec<usize>) {
    within.iter().partition(|&&i| bases[i] == Basis::Computational)
}

/// `f((bits xor w)|_set)` padded to the hash input length.
pub(crate) fn hash_selection(
    f: &crate::hashing::HashFunction,
    bits: &BitString,
    w: &BitString,
    set: &[usize],
) -> crate::error::Result<BitString> {
    f.apply(&bits.xor(w).select(set))
}
