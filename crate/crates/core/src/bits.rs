//! Fixed-length bit strings.
//!
//! Bit `0` is the leftmost bit. The JSON form is `{"bits": n, "hex": "..."}`
//! with bits packed MSB-first and the final byte zero-padded on the right.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_u8s(bits: &[u8]) -> Self {
        Self { bits: bits.iter().map(|&b| b & 1 == 1).collect() }
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_uint(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let bits = (0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect();
        Self { bits }
    }

    pub fn to_uint(&self) -> u64 {
        assert!(self.bits.len() <= 64, "bit string too long for u64");
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bit(&self, i: usize) -> u8 {
        u8::from(self.bits[i])
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn push(&mut self, value: bool) {
        self.bits.push(value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len(), other.len(), "xor of unequal lengths");
        BitString { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect() }
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitString) -> u8 {
        assert_eq!(self.len(), other.len(), "dot of unequal lengths");
        let ones = self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count();
        (ones % 2) as u8
    }

    /// Appends zeros on the right until the string has `len` bits.
    pub fn padded(&self, len: usize) -> Result<BitString, Error> {
        if self.len() > len {
            return Err(Error::Length { expected: len, found: self.len() });
        }
        let mut bits = self.bits.clone();
        bits.resize(len, false);
        Ok(BitString { bits })
    }

    /// Bits at the given positions, in the order given.
    pub fn select(&self, positions: &[usize]) -> BitString {
        BitString { bits: positions.iter().map(|&i| self.bits[i]).collect() }
    }

    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(len: usize, text: &str) -> Result<BitString, Error> {
        let bytes = hex::decode(text).map_err(|e| Error::Parse(format!("bad hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Parse(format!(
                "hex payload has {} bytes, {} bits need {}",
                bytes.len(),
                len,
                len.div_ceil(8)
            )));
        }
        let bits: Vec<bool> = (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
        // padding bits must be zero so that the encoding is canonical
        for i in len..bytes.len() * 8 {
            if bytes[i / 8] & (0x80 >> (i % 8)) != 0 {
                return Err(Error::Parse("nonzero padding bits in hex payload".into()));
            }
        }
        Ok(BitString { bits })
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for &b in &self.bits {
            write!(f, "{}", u8::from(b))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Self { bits: iter.into_iter().collect() }
    }
}

#[derive(Serialize, Deserialize)]
struct HexForm {
    bits: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        HexForm { bits: self.len(), hex: self.to_hex() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let form = HexForm::deserialize(deserializer)?;
        BitString::from_hex(form.bits, &form.hex).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uint_round_trip_is_msb_first() {
        let s = BitString::from_uint(0b1011, 4);
        assert_eq!(s.to_string(), "1011");
        assert_eq!(s.to_uint(), 0b1011);
    }

    #[test]
    fn hex_packs_msb_first() {
        let s = BitString::from_u8s(&[1, 0, 1, 0, 1]);
        assert_eq!(s.to_hex(), "a8");
        assert_eq!(BitString::from_hex(5, "a8").unwrap(), s);
        assert!(BitString::from_hex(5, "a9").is_err());
        assert!(BitString::from_hex(9, "a8").is_err());
    }

    #[test]
    fn padding_appends_on_the_right() {
        let s = BitString::from_u8s(&[1, 1]);
        assert_eq!(s.padded(4).unwrap().to_string(), "1100");
        assert!(s.padded(1).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..80)) {
            let s = BitString::from_bits(bits);
            let text = serde_json::to_string(&s).unwrap();
            let back: BitString = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
