//! Bit-vector helpers and the stage-tagged [`BitBlock`].
//!
//! Bit vectors are plain `Vec<u8>` holding one bit (0 or 1) per element.
//! Bit 0 is the first bit on the wire; packing into bytes is
//! least-significant-bit first.

use std::fmt;

/// Pipeline stage a block of bits has reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Raw,
    Sifted,
    Corrected,
    Secret,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Raw => "raw",
            Stage::Sifted => "sifted",
            Stage::Corrected => "corrected",
            Stage::Secret => "secret",
        })
    }
}

/// Counters carried with a block: received bits `b`, errors `e`, disclosed parities `d`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Provenance {
    pub b: u64,
    pub e: u64,
    pub d: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    pub bits: Vec<u8>,
    pub stage: Stage,
    pub provenance: Provenance,
}

impl BitBlock {
    pub fn new(bits: Vec<u8>, stage: Stage) -> Self {
        let b = bits.len() as u64;
        Self {
            bits,
            stage,
            provenance: Provenance { b, e: 0, d: 0 },
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Packs bits LSB-first into bytes; the final byte is zero-padded.
pub fn pack(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

/// Inverse of [`pack`]; `n` is the number of bits to read.
pub fn unpack(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

/// Packs bits into little-endian 64-bit words (bit i is bit i%64 of word i/64).
pub fn to_words(bits: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 64] |= ((b & 1) as u64) << (i % 64);
    }
    out
}

pub fn from_words(words: &[u64], n: usize) -> Vec<u8> {
    (0..n).map(|i| ((words[i / 64] >> (i % 64)) & 1) as u8).collect()
}

pub fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn weight(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b != 0).count()
}

/// Parity of the bits selected by `indices`.
pub fn parity_of<I: IntoIterator<Item = usize>>(bits: &[u8], indices: I) -> u8 {
    indices.into_iter().fold(0, |acc, i| acc ^ bits[i])
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_is_lsb_first() {
        assert_eq!(pack(&[1, 0, 0, 0, 0, 0, 0, 0, 0, 1]), vec![0x01, 0x02]);
        assert_eq!(pack(&[0, 0, 0, 0, 0, 0, 0, 1]), vec![0x80]);
        assert!(pack(&[]).is_empty());
    }

    #[test]
    fn hex_rejects_odd_and_garbage() {
        assert_eq!(from_hex("0aff"), Some(vec![0x0a, 0xff]));
        assert_eq!(from_hex("abc"), None);
        assert_eq!(from_hex("zz"), None);
    }

    proptest! {
        #[test]
        fn pack_and_words_round_trip(bits in proptest::collection::vec(0u8..2, 0..300)) {
            prop_assert_eq!(unpack(&pack(&bits), bits.len()), bits.clone());
            prop_assert_eq!(from_words(&to_words(&bits), bits.len()), bits);
        }
    }
}
