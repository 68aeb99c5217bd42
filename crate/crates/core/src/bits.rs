//! Packed, fixed-length bit strings.
//!
//! Bits are packed MSB-first: bit 0 is the high bit of byte 0. Padding bits in
//! the final byte are always zero.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BitLengthError {
    #[error("bit length mismatch: {left} vs {right}")]
    Mismatch { left: usize, right: usize },
    #[error("{bytes} bytes cannot hold {bits} bits with zero padding")]
    BadPacking { bits: usize, bytes: usize },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..len {
            out.set(i, true);
        }
        out
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    /// Builds a bit string from packed bytes, rejecting a wrong byte count or
    /// nonzero padding.
    pub fn from_packed(bytes: &[u8], len: usize) -> Result<Self, BitLengthError> {
        let bad = BitLengthError::BadPacking {
            bits: len,
            bytes: bytes.len(),
        };
        if bytes.len() != len.div_ceil(8) {
            return Err(bad);
        }
        let spare = bytes.len() * 8 - len;
        if spare > 0 {
            let mask = (1u8 << spare) - 1;
            if bytes[bytes.len() - 1] & mask != 0 {
                return Err(bad);
            }
        }
        Ok(Self {
            bytes: bytes.to_vec(),
            len,
        })
    }

    /// Takes the first `len` bits of `bytes`, clearing anything past them.
    pub fn truncate_from(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() * 8 >= len, "not enough bytes for {len} bits");
        let mut out = Self {
            bytes: bytes[..len.div_ceil(8)].to_vec(),
            len,
        };
        out.clear_padding();
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 0x80u8 >> (i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] ^= 0x80u8 >> (i % 8);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &Self) -> Result<Self, BitLengthError> {
        self.check_len(other)?;
        let bytes = self
            .bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            bytes,
            len: self.len,
        })
    }

    pub fn complement(&self) -> Self {
        let mut out = Self {
            bytes: self.bytes.iter().map(|b| !b).collect(),
            len: self.len,
        };
        out.clear_padding();
        out
    }

    fn check_len(&self, other: &Self) -> Result<(), BitLengthError> {
        if self.len != other.len {
            return Err(BitLengthError::Mismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    fn clear_padding(&mut self) {
        let spare = self.bytes.len() * 8 - self.len;
        if spare > 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] &= !((1u8 << spare) - 1);
        }
    }
}

/// Number of positions where `a` and `b` differ.
pub fn hamming(a: &BitString, b: &BitString) -> Result<usize, BitLengthError> {
    a.check_len(b)?;
    Ok(a.bytes
        .iter()
        .zip(&b.bytes)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString[{}](", self.len)?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_distance(a: &BitString, b: &BitString) -> usize {
        let mut d = 0;
        for i in 0..a.len() {
            if a.get(i) != b.get(i) {
                d += 1;
            }
        }
        d
    }

    #[test]
    fn complement_distance_is_full_length() {
        assert_eq!(hamming(&BitString::zeros(8), &BitString::ones(8)), Ok(8));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(hamming(&BitString::zeros(8), &BitString::zeros(9)).is_err());
        assert!(BitString::zeros(3).xor(&BitString::zeros(4)).is_err());
    }

    #[test]
    fn padding_stays_zero() {
        let ones = BitString::ones(11);
        assert_eq!(ones.as_bytes(), &[0xff, 0xe0]);
        assert_eq!(BitString::zeros(11).complement(), ones);
        assert!(BitString::from_packed(&[0xff, 0xf0], 11).is_err());
        assert!(BitString::from_packed(&[0xff], 11).is_err());
        assert_eq!(BitString::from_packed(&[0xff, 0xe0], 11), Ok(ones));
    }

    #[test]
    fn packed_distance_matches_bit_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let len = rng.random_range(1..600);
            let a = BitString::from_bools(&(0..len).map(|_| rng.random()).collect::<Vec<_>>());
            let b = BitString::from_bools(&(0..len).map(|_| rng.random()).collect::<Vec<_>>());
            assert_eq!(hamming(&a, &b).unwrap(), naive_distance(&a, &b));
        }
    }

    fn bits(len: usize) -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), len).prop_map(|v| BitString::from_bools(&v))
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            (a, b, c) in (1usize..200).prop_flat_map(|n| (bits(n), bits(n), bits(n)))
        ) {
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
            prop_assert_eq!(ab == 0, a == b);
        }

        #[test]
        fn packed_roundtrip(a in (0usize..100).prop_flat_map(bits)) {
            prop_assert_eq!(BitString::from_packed(a.as_bytes(), a.len()).unwrap(), a);
        }
    }
}
