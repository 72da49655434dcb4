//! Payload layouts for the public-channel message types.
//!
//! Integers are little-endian; `varint` is unsigned LEB128; bit strings are
//! packed LSB-first behind a `u32` bit count.
//!
//! ```text
//! SIFT_DETECT          u64 first_slot | varint count | count x varint gap
//! SIFT_BASES           bits (one basis per announced slot)
//! SIFT_SARG_PAIRS      bits (two per slot: bit value of the Z state, then of the X state)
//! SIFT_KEEP            bits (keep flag per announced slot)
//! EC_CASCADE_PARITIES  u8 0 | varint count | count x (varint pass, varint start, varint len)
//!                      u8 1 | varint round | varint count   (random-subset check)
//! EC_CASCADE_REPLY     bits (one parity per requested range or subset)
//! EC_NIAGARA_SYNDROME  u32 b | u32 p | u64 seed | bits syndrome
//! EC_ACK               u8 status (0 ok, 1 failed)
//! PA_PARAMS            see `privamp::encode_params`
//! KEYRELAY_XOR         u32 length | bits (key XOR pad)
//! CONTROL              u8 kind | kind-specific body
//! ```
//!
//! Slot gaps are measured from the previous slot (or `first_slot` for the
//! first entry), so the list must be strictly increasing.

use crate::bits;

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn varint(&mut self, mut v: u64) -> &mut Self {
        loop {
            let byte = (v & 0x7F) as u8;
            v >>= 7;
            if v == 0 {
                self.buf.push(byte);
                return self;
            }
            self.buf.push(byte | 0x80);
        }
    }

    /// `u32` bit count followed by the packed bits.
    pub fn bits(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(&bits::pack(b));
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

pub type ReadResult<T> = Result<T, &'static str>;

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> ReadResult<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or("length overflow")?;
        let s = self.buf.get(self.pos..end).ok_or("truncated payload")?;
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> ReadResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> ReadResult<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> ReadResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> ReadResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn varint(&mut self) -> ReadResult<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.u8()?;
            let part = (byte & 0x7F) as u64;
            if shift == 63 && part > 1 {
                return Err("varint overflow");
            }
            v |= part << shift;
            if byte & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err("varint overflow")
    }

    /// A varint that must fit in `usize` and be at most `max`.
    pub fn count(&mut self, max: usize) -> ReadResult<usize> {
        let v = self.varint()?;
        if v > max as u64 {
            return Err("count out of range");
        }
        Ok(v as usize)
    }

    pub fn bits(&mut self) -> ReadResult<Vec<u8>> {
        let n = self.u32()? as usize;
        let packed = self.take(n.div_ceil(8))?;
        Ok(bits::unpack(packed, n))
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    pub fn finish(&self) -> ReadResult<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err("trailing bytes in payload")
        }
    }
}

/// Encodes a strictly increasing slot list.
pub fn encode_slots(first_slot: u64, slots: &[u64]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(first_slot).varint(slots.len() as u64);
    let mut prev = first_slot;
    for (i, &s) in slots.iter().enumerate() {
        let gap = if i == 0 { s - first_slot } else { s - prev - 1 };
        w.varint(gap);
        prev = s;
    }
    w.finish()
}

pub fn decode_slots(payload: &[u8]) -> ReadResult<(u64, Vec<u64>)> {
    let mut r = Reader::new(payload);
    let first = r.u64()?;
    let n = r.count(payload.len())?;
    let mut slots = Vec::with_capacity(n);
    let mut prev = first;
    for i in 0..n {
        let gap = r.varint()?;
        let s = if i == 0 {
            first.checked_add(gap)
        } else {
            prev.checked_add(gap).and_then(|v| v.checked_add(1))
        }
        .ok_or("slot index overflow")?;
        slots.push(s);
        prev = s;
    }
    r.finish()?;
    Ok((first, slots))
}

pub fn encode_bits(b: &[u8]) -> Vec<u8> {
    Writer::new().bits(b).finish()
}

pub fn decode_bits(payload: &[u8]) -> ReadResult<Vec<u8>> {
    let mut r = Reader::new(payload);
    let b = r.bits()?;
    r.finish()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn varint_edges() {
        for v in [0u64, 1, 127, 128, 300, u32::MAX as u64, u64::MAX] {
            let bytes = Writer::new().varint(v).finish();
            let mut r = Reader::new(&bytes);
            assert_eq!(r.varint().unwrap(), v);
            r.finish().unwrap();
        }
        assert_eq!(Writer::new().varint(300).finish(), vec![0xAC, 0x02]);
        assert!(Reader::new(&[0xFF; 11]).varint().is_err());
    }

    #[test]
    fn slot_list_layout() {
        let bytes = encode_slots(100, &[100, 101, 105]);
        assert_eq!(bytes, vec![100, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 3]);
        assert_eq!(decode_slots(&bytes).unwrap(), (100, vec![100, 101, 105]));
        assert!(decode_slots(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn slots_round_trip(first in 0u64..1 << 40, mut gaps in proptest::collection::vec(0u64..5000, 0..300)) {
            let mut s = first;
            let slots: Vec<u64> = gaps.iter_mut().enumerate().map(|(i, g)| {
                s += *g + u64::from(i > 0);
                s
            }).collect();
            prop_assert_eq!(decode_slots(&encode_slots(first, &slots)).unwrap(), (first, slots));
        }

        #[test]
        fn bits_round_trip(b in proptest::collection::vec(0u8..2, 0..500)) {
            prop_assert_eq!(decode_bits(&encode_bits(&b)).unwrap(), b);
        }
    }
}
