//! Versioned message log of a protocol run.
//!
//! One object per message: `{step, sender_of_message, payload, round_index}`.
//! The addressee sits inside the payload as `to`. Bit strings serialize as
//! `{bits, hex}`, so their length is explicit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OtOutcome, ProtocolConfig, RoundTag, RoundType, Verdict};
use crate::bits::BitString;
use crate::entcf::{ChallengeType, KeyId};
use crate::error::{Error, Result};
use crate::hashing::HashFunction;
use crate::qsim::Basis;

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Sender,
    Receiver,
    ComponentA,
    ComponentB,
    /// Bell-pair source of the non-device-independent protocol.
    Source,
    /// A party's private record; never transmitted.
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestData {
    pub c: BitString,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<BitString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<BitString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    /// Public key handed to a component. Carries no family information.
    Key { key_id: KeyId, domain_bits: usize },
    Commitment { c: BitString },
    Challenge { ct: ChallengeType },
    Preimage { z: BitString },
    Equation { d: BitString },
    Question { basis: Basis },
    Answer { bit: u8, h: u8 },
    /// Bell-pair labels delivered by the source.
    Labels { v: BitString },
    SenderRound {
        theta_a: Basis,
        theta_b: Basis,
        trapdoor_a: String,
        trapdoor_b: String,
        ct: ChallengeType,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<Basis>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<Basis>,
    },
    ReceiverRound {
        #[serde(rename = "override")]
        overridden: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<Basis>,
    },
    /// Measurement record of the Bell-pair protocol.
    Measurements { bases: Vec<Basis>, bits: BitString },
    RoundTypes { types: Vec<RoundType> },
    Tags { tags: Vec<RoundTag> },
    IndexSet { indices: Vec<usize> },
    Test { data: TestData },
    Verdicts { verdicts: Vec<(usize, Verdict)>, tested: usize, failed: usize, fraction: f64, threshold: f64, abort: bool },
    TildeI { indices: Vec<usize>, trapdoors: Vec<String> },
    Corrections { w: BitString },
    Announce { x: Vec<Basis>, f0: HashFunction, f1: HashFunction },
    SenderOutput { s0: BitString, s1: BitString },
    ReceiverOutput { c: u8, y: BitString },
    /// Guesses of both strings by a dishonest receiver.
    Guesses { s0: BitString, s1: BitString },
    Abort { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub to: Party,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub step: u8,
    pub sender_of_message: Party,
    pub payload: Payload,
    pub round_index: Option<usize>,
}

impl Message {
    /// Whether the sender of the OT sees this message: everything it or its
    /// component sends or receives, and its own private records.
    pub fn sender_visible(&self) -> bool {
        let near = |p: Party| matches!(p, Party::Sender | Party::ComponentA);
        if self.payload.to == Party::Local {
            return self.sender_of_message == Party::Sender;
        }
        near(self.sender_of_message) || near(self.payload.to)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Ot1,
    Ot4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub version: u32,
    pub protocol: ProtocolKind,
    pub config: ProtocolConfig,
    /// Strategy choices of the run, echoed for the reader.
    pub options: serde_json::Value,
    pub messages: Vec<Message>,
    pub outcome: Option<OtOutcome>,
}

impl Transcript {
    pub fn new(protocol: ProtocolKind, config: ProtocolConfig, options: serde_json::Value) -> Self {
        Self { version: TRANSCRIPT_VERSION, protocol, config, options, messages: Vec::new(), outcome: None }
    }

    pub fn send(&mut self, step: u8, from: Party, to: Party, round: Option<usize>, body: Body) {
        self.messages.push(Message { step, sender_of_message: from, payload: Payload { to, body }, round_index: round });
    }

    /// A private record of `owner`.
    pub fn record(&mut self, step: u8, owner: Party, round: Option<usize>, body: Body) {
        self.messages.push(Message { step, sender_of_message: owner, payload: Payload { to: Party::Local, body }, round_index: round });
    }

    /// The messages the OT sender can see, in order.
    pub fn sender_view(&self) -> Vec<&Message> {
        self.messages.iter().filter(|m| m.sender_visible()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("transcript: {e}")))?;
        let found = value.get("version").and_then(serde_json::Value::as_u64).ok_or_else(|| Error::Malformed("transcript has no version".into()))?;
        if found != u64::from(TRANSCRIPT_VERSION) {
            return Err(Error::Version { expected: TRANSCRIPT_VERSION, found: found as u32 });
        }
        serde_json::from_value(value).map_err(|e| Error::Malformed(format!("transcript: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_carries_addressee_and_kind() {
        let mut t = Transcript::new(ProtocolKind::Ot4, ProtocolConfig::default(), serde_json::Value::Null);
        t.send(1, Party::Sender, Party::ComponentA, Some(0), Body::Question { basis: Basis::Hadamard });
        t.record(5, Party::Receiver, None, Body::ReceiverRound { overridden: true, y: Some(Basis::Computational) });
        let v = serde_json::to_value(&t.messages[0]).unwrap();
        assert_eq!(v["payload"]["to"], "component_a");
        assert_eq!(v["payload"]["kind"], "question");
        assert_eq!(v["payload"]["basis"], "hadamard");
        assert_eq!(v["sender_of_message"], "sender");
        assert_eq!(v["round_index"], 0);
        assert_eq!(t.sender_view().len(), 1);
        let back = Transcript::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn version_and_truncation_errors() {
        let t = Transcript::new(ProtocolKind::Ot1, ProtocolConfig::default(), serde_json::Value::Null);
        let text = t.to_json().unwrap();
        assert!(matches!(Transcript::from_json(&text[..text.len() / 2]), Err(Error::Parse(_))));
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(Transcript::from_json(&bumped), Err(Error::Version { expected: 1, found: 2 })));
    }
}
