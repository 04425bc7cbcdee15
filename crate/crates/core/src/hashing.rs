//! Two-universal hashing by random binary matrices.
//!
//! `F(x) = x M` over GF(2) for an `n x l` matrix `M`. Inputs shorter than `n`
//! are padded with zeros on the right.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashFunction {
    input_bits: usize,
    output_bits: usize,
    /// Row-major, `input_bits` rows of `output_bits` bits.
    descriptor: BitString,
}

impl HashFunction {
    pub fn from_descriptor(n: usize, l: usize, descriptor: BitString) -> Result<Self> {
        check_shape(n, l)?;
        if descriptor.len() != n * l {
            return Err(Error::Length { expected: n * l, found: descriptor.len() });
        }
        Ok(Self { input_bits: n, output_bits: l, descriptor })
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_bits(&self) -> usize {
        self.output_bits
    }

    pub fn descriptor(&self) -> &BitString {
        &self.descriptor
    }

    pub fn entry(&self, row: usize, col: usize) -> bool {
        self.descriptor.get(row * self.output_bits + col)
    }

    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        if x.len() > self.input_bits {
            return Err(Error::Length { expected: self.input_bits, found: x.len() });
        }
        let mut out = vec![false; self.output_bits];
        // padding bits are zero and contribute nothing
        for (row, bit) in x.iter().enumerate() {
            if bit {
                for (col, o) in out.iter_mut().enumerate() {
                    *o ^= self.entry(row, col);
                }
            }
        }
        Ok(BitString::from_bits(out))
    }

    /// GF(2) rank of the descriptor.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<u64> = (0..self.input_bits)
            .map(|r| (0..self.output_bits).fold(0u64, |acc, c| (acc << 1) | u64::from(self.entry(r, c))))
            .collect();
        let mut rank = 0;
        for col in (0..self.output_bits).rev() {
            let bit = 1u64 << col;
            if let Some(p) = (rank..rows.len()).find(|&i| rows[i] & bit != 0) {
                rows.swap(rank, p);
                let pivot = rows[rank];
                for (i, r) in rows.iter_mut().enumerate() {
                    if i != rank && *r & bit != 0 {
                        *r ^= pivot;
                    }
                }
                rank += 1;
            }
        }
        rank
    }
}

fn check_shape(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > n || l > 64 {
        return Err(Error::HashShape { n, l });
    }
    Ok(())
}

pub fn sample_hash<R: RngCore + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<HashFunction> {
    check_shape(n, l)?;
    let bits = (0..n * l).map(|_| rng.random::<bool>()).collect();
    HashFunction::from_descriptor(n, l, bits)
}

pub fn apply_hash(f: &HashFunction, x: &BitString) -> Result<BitString> {
    f.apply(x)
}

/// Every member of the family; `n * l` must be small.
pub fn enumerate_family(n: usize, l: usize) -> Result<Vec<HashFunction>> {
    check_shape(n, l)?;
    if n * l > 20 {
        return Err(Error::TooLarge(format!("hash family with {} descriptor bits", n * l)));
    }
    (0..1u64 << (n * l))
        .map(|v| HashFunction::from_descriptor(n, l, BitString::from_uint(v, n * l)))
        .collect()
}
