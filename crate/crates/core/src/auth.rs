//! Wegman-Carter authentication of public-channel messages.
//!
//! Each tag costs 128 fresh key bits: a 64-bit evaluation point `k` and a
//! 64-bit one-time pad. The message is split into 64-bit little-endian chunks
//! `c_1..c_L` (the last zero-padded) followed by its length in bits, and
//!
//! ```text
//! h   = (((c_1 * k) ^ c_2) * k ^ ... ^ c_L) * k ^ bitlen) * k
//! tag = h ^ pad
//! ```
//!
//! over GF(2^64) with `x^64 + x^4 + x^3 + x + 1`. Keys come from an
//! [`AuthKeyLedger`] that never issues the same bit twice; it starts with a
//! pre-placed secret and is topped up from distilled QKD output.

use std::collections::BTreeSet;
use std::ops::Range;

use thiserror::Error;

use crate::bits;
use crate::privamp::field::clmul64;
use crate::privamp::{Lineage, SecretBlock};

/// Key bits consumed per tag.
pub const TAG_KEY_BITS: usize = 128;

/// Low terms of the GF(2^64) reduction polynomial.
const POLY_TAIL: u64 = 0x1B;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthError {
    #[error("insufficient authentication key: need {needed} bits, {available} available")]
    InsufficientKey { needed: usize, available: usize },
    #[error("authentication ledger desynchronised: expected epoch {expected}, tag has {got}")]
    Desync { expected: u64, got: u64 },
    #[error("authentication tag rejected")]
    Rejected,
    #[error("block {0:?} already deposited")]
    DuplicateLineage(Lineage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    PrePlaced,
    Qkd(Lineage),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginMark {
    pub range: Range<usize>,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthTag {
    pub tag: u64,
    /// Sequence number of the ledger range that produced the tag.
    pub key_epoch: u64,
}

impl AuthTag {
    pub fn to_bytes(self) -> [u8; 8] {
        self.tag.to_le_bytes()
    }
}

pub fn gf64_mul(a: u64, b: u64) -> u64 {
    let p = clmul64(a, b);
    let (lo, hi) = (p as u64, (p >> 64) as u64);
    let t = clmul64(hi, POLY_TAIL);
    let spill = clmul64((t >> 64) as u64, POLY_TAIL) as u64;
    lo ^ t as u64 ^ spill
}

/// Polynomial hash of `msg` at point `k`, before padding.
pub fn poly_hash(k: u64, msg: &[u8]) -> u64 {
    let mut h = 0u64;
    for chunk in msg.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = gf64_mul(h ^ u64::from_le_bytes(buf), k);
    }
    gf64_mul(h ^ (msg.len() as u64 * 8), k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthKeyLedger {
    pool: Vec<u8>,
    consumed: usize,
    epoch: u64,
    origins: Vec<OriginMark>,
    deposited: BTreeSet<Lineage>,
    issued: Vec<Range<usize>>,
}

impl AuthKeyLedger {
    /// A ledger seeded with the pre-placed key (one bit per element).
    pub fn new(preplaced: Vec<u8>) -> Self {
        let origins = vec![OriginMark {
            range: 0..preplaced.len(),
            origin: Origin::PrePlaced,
        }];
        Self {
            pool: preplaced,
            consumed: 0,
            epoch: 0,
            origins,
            deposited: BTreeSet::new(),
            issued: Vec::new(),
        }
    }

    pub fn available(&self) -> usize {
        self.pool.len() - self.consumed
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn total_deposited(&self) -> usize {
        self.pool.len()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn origins(&self) -> &[OriginMark] {
        &self.origins
    }

    pub fn issued(&self) -> &[Range<usize>] {
        &self.issued
    }

    /// Hands out the next 128 bits, oldest first.
    fn take_key(&mut self) -> Result<(u64, u64), AuthError> {
        if self.available() < TAG_KEY_BITS {
            return Err(AuthError::InsufficientKey {
                needed: TAG_KEY_BITS,
                available: self.available(),
            });
        }
        let range = self.consumed..self.consumed + TAG_KEY_BITS;
        let words = bits::to_words(&self.pool[range.clone()]);
        self.consumed = range.end;
        self.epoch += 1;
        self.issued.push(range);
        Ok((words[0], words[1]))
    }

    /// Tags `msg`, returning the tag and the number of key bits spent.
    pub fn make_tag(&mut self, msg: &[u8]) -> Result<(AuthTag, usize), AuthError> {
        let key_epoch = self.epoch;
        let (k, pad) = self.take_key()?;
        let tag = poly_hash(k, msg) ^ pad;
        Ok((AuthTag { tag, key_epoch }, TAG_KEY_BITS))
    }

    /// Checks `tag` against `msg`. Key bits are spent whether or not the tag
    /// verifies, keeping both ends of the ledger in step.
    pub fn verify_tag(&mut self, msg: &[u8], tag: AuthTag) -> Result<(), AuthError> {
        if tag.key_epoch != self.epoch {
            return Err(AuthError::Desync {
                expected: self.epoch,
                got: tag.key_epoch,
            });
        }
        let (k, pad) = self.take_key()?;
        if poly_hash(k, msg) ^ pad == tag.tag {
            Ok(())
        } else {
            Err(AuthError::Rejected)
        }
    }

    /// Appends a distilled block to the pool.
    pub fn replenish(&mut self, block: &SecretBlock) -> Result<(), AuthError> {
        if !self.deposited.insert(block.lineage) {
            return Err(AuthError::DuplicateLineage(block.lineage));
        }
        let start = self.pool.len();
        self.pool.extend_from_slice(&block.bits);
        self.origins.push(OriginMark {
            range: start..self.pool.len(),
            origin: Origin::Qkd(block.lineage),
        });
        Ok(())
    }

    /// Fraction of consumed bits that came from QKD output.
    pub fn qkd_fraction_consumed(&self) -> f64 {
        if self.consumed == 0 {
            return 0.0;
        }
        let qkd: usize = self
            .origins
            .iter()
            .filter(|o| matches!(o.origin, Origin::Qkd(_)))
            .map(|o| o.range.end.min(self.consumed).saturating_sub(o.range.start))
            .sum();
        qkd as f64 / self.consumed as f64
    }

    /// Checks that issued ranges are disjoint, in order and inside the pool.
    pub fn audit(&self) -> Result<(), String> {
        let mut end = 0usize;
        for r in &self.issued {
            if r.start < end {
                return Err(format!("range {r:?} overlaps an earlier issue ending at {end}"));
            }
            if r.len() != TAG_KEY_BITS {
                return Err(format!("range {r:?} has the wrong width"));
            }
            end = r.end;
        }
        if end != self.consumed || self.consumed > self.pool.len() {
            return Err(format!(
                "consumed offset {} disagrees with issues ending at {end} (pool {})",
                self.consumed,
                self.pool.len()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    fn ledger(bits: usize, seed: u64) -> AuthKeyLedger {
        AuthKeyLedger::new(XorShift64Star::new(seed).bits(bits))
    }

    fn block(bits: usize, session_id: u32, block_id: u32) -> SecretBlock {
        SecretBlock {
            bits: XorShift64Star::new(block_id as u64).bits(bits),
            lineage: Lineage { session_id, block_id },
        }
    }

    /// Bit-serial multiply-and-reduce, independent of the clmul path.
    fn slow_mul(a: u64, b: u64) -> u64 {
        let (mut a, mut b, mut r) = (a, b, 0u64);
        while b != 0 {
            if b & 1 == 1 {
                r ^= a;
            }
            let carry = a >> 63;
            a <<= 1;
            if carry == 1 {
                a ^= POLY_TAIL;
            }
            b >>= 1;
        }
        r
    }

    /// Sum of c_i * k^(L+2-i) plus bitlen * k, computed with explicit powers.
    fn straight_line_hash(k: u64, msg: &[u8]) -> u64 {
        let mut coeffs: Vec<u64> = msg
            .chunks(8)
            .map(|c| {
                let mut b = [0u8; 8];
                b[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(b)
            })
            .collect();
        coeffs.push(msg.len() as u64 * 8);
        let n = coeffs.len();
        let mut acc = 0u64;
        for (i, c) in coeffs.iter().enumerate() {
            let mut pw = 1u64;
            for _ in 0..(n - i) {
                pw = slow_mul(pw, k);
            }
            acc ^= slow_mul(*c, pw);
        }
        acc
    }

    #[test]
    fn gf64_multiplication_matches_bit_serial() {
        let mut g = XorShift64Star::new(1);
        for _ in 0..1000 {
            let (a, b) = (g.next_u64(), g.next_u64());
            assert_eq!(gf64_mul(a, b), slow_mul(a, b));
        }
        assert_eq!(gf64_mul(1 << 63, 2), POLY_TAIL);
    }

    #[test]
    fn horner_matches_straight_line_oracle() {
        let mut g = XorShift64Star::new(2);
        let msg: Vec<u8> = (0..100).map(|_| g.next_u64() as u8).collect();
        let k = g.next_u64();
        assert_eq!(poly_hash(k, &msg), straight_line_hash(k, &msg));
    }

    #[test]
    fn frozen_tag_vector() {
        // Key point and pad are the first 128 bits of the pool, LSB first.
        let mut pool = bits::from_words(&[0x0123_4567_89AB_CDEF, 0xFEDC_BA98_7654_3210], 128);
        pool.extend(vec![0; 128]);
        let mut l = AuthKeyLedger::new(pool);
        let (tag, spent) = l.make_tag(b"quantum key distribution").unwrap();
        assert_eq!(spent, 128);
        assert_eq!(tag.tag, FROZEN_TAG);
    }

    const FROZEN_TAG: u64 = 0x6149_9B65_D9CC_A9C3;

    #[test]
    fn empty_message_tag_is_pad_xor_length_hash() {
        let mut l = ledger(256, 3);
        let words = bits::to_words(&XorShift64Star::new(3).bits(128));
        let (tag, _) = l.make_tag(&[]).unwrap();
        assert_eq!(tag.tag, words[1] ^ gf64_mul(0, words[0]));
        assert_eq!(tag.tag, words[1]);
    }

    #[test]
    fn key_progression_changes_tags() {
        let mut a = ledger(1024, 4);
        let mut b = a.clone();
        let (t1, _) = a.make_tag(b"hello").unwrap();
        let (t2, _) = b.make_tag(b"hello").unwrap();
        assert_eq!(t1, t2);
        let (t3, _) = a.make_tag(b"hello").unwrap();
        assert_ne!(t1.tag, t3.tag);
        assert_eq!(t3.key_epoch, 1);
    }

    #[test]
    fn verify_accepts_and_consumes_in_step() {
        let mut alice = ledger(1024, 5);
        let mut bob = alice.clone();
        for i in 0..8u8 {
            let msg = vec![i; i as usize * 7];
            let (tag, _) = alice.make_tag(&msg).unwrap();
            bob.verify_tag(&msg, tag).unwrap();
            assert_eq!(alice.consumed(), bob.consumed());
        }
        assert!(matches!(alice.make_tag(b"x"), Err(AuthError::InsufficientKey { .. })));
    }

    #[test]
    fn single_bit_tamper_is_always_rejected() {
        let mut g = XorShift64Star::new(6);
        let mut alice = ledger(128 * 1000, 7);
        let mut bob = alice.clone();
        for _ in 0..1000 {
            let len = 1 + g.below(200) as usize;
            let mut msg: Vec<u8> = (0..len).map(|_| g.next_u64() as u8).collect();
            let (tag, _) = alice.make_tag(&msg).unwrap();
            let bit = g.below(len as u64 * 8) as usize;
            msg[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(bob.verify_tag(&msg, tag), Err(AuthError::Rejected));
        }
        assert_eq!(alice.consumed(), bob.consumed());
        alice.audit().unwrap();
        bob.audit().unwrap();
    }

    #[test]
    fn replayed_tag_is_a_desync() {
        let mut alice = ledger(1024, 8);
        let mut bob = alice.clone();
        let (tag, _) = alice.make_tag(b"m").unwrap();
        bob.verify_tag(b"m", tag).unwrap();
        let before = bob.consumed();
        assert_eq!(
            bob.verify_tag(b"m", tag),
            Err(AuthError::Desync { expected: 1, got: 0 })
        );
        assert_eq!(bob.consumed(), before);
    }

    #[test]
    fn replenish_grows_pool_and_rejects_duplicates() {
        let mut l = ledger(256, 9);
        let before = l.available();
        l.replenish(&block(1000, 1, 1)).unwrap();
        assert_eq!(l.available(), before + 1000);
        let snapshot = l.clone();
        assert_eq!(
            l.replenish(&block(1000, 1, 1)),
            Err(AuthError::DuplicateLineage(Lineage { session_id: 1, block_id: 1 }))
        );
        assert_eq!(l, snapshot);
        assert_eq!(l.origins().len(), 2);
        assert_eq!(l.origins()[1].range, 256..1256);
    }

    #[test]
    fn interleaved_use_never_reissues_bits() {
        let mut g = XorShift64Star::new(10);
        let mut l = ledger(512, 11);
        let mut next_block = 0u32;
        for _ in 0..2000 {
            if g.bernoulli(0.3) {
                next_block += 1;
                l.replenish(&block(64 + g.below(400) as usize, 0, next_block)).unwrap();
            } else {
                let _ = l.make_tag(b"audit");
            }
            l.audit().unwrap();
        }
        let ranges = l.issued();
        assert!(ranges.windows(2).all(|w| w[0].end <= w[1].start));
        assert!(l.qkd_fraction_consumed() > 0.0);
    }
}
