//! Privacy amplification by affine hashing over GF(2^n).
//!
//! The initiating node picks a field polynomial, an n-bit multiplier and an
//! m-bit addend; both sides then compute
//!
//! ```text
//! secret = low_m(multiplier * corrected mod poly) XOR addend
//! ```
//!
//! Bit `i` of every block is the coefficient of `x^i`, and blocks are packed
//! least-significant-bit first on the wire.

pub mod field;
pub mod table;

use thiserror::Error;

use crate::bits::{self, BitBlock, Provenance, Stage};
use crate::rng::XorShift64Star;
use field::{mul_mod, words_for, SparsePoly};
pub use table::{poly_for, size_for, SUPPORTED_SIZES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaError {
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("output length m = {m} must satisfy 0 < m <= n = {n}")]
    BadOutputLength { n: usize, m: usize },
    #[error("unsupported field size {0}")]
    UnsupportedSize(usize),
    #[error("invalid field polynomial")]
    BadPolynomial,
    #[error("malformed PA_PARAMS payload: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaParams {
    pub n: usize,
    pub m: usize,
    /// Zero bits appended to the corrected block to reach `n`.
    pub pad_len: usize,
    pub poly: SparsePoly,
    pub multiplier: Vec<u8>,
    pub addend: Vec<u8>,
}

/// Which corrected block a secret block was distilled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lineage {
    pub session_id: u32,
    pub block_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretBlock {
    pub bits: Vec<u8>,
    pub lineage: Lineage,
}

impl SecretBlock {
    pub fn stage(&self) -> Stage {
        Stage::Secret
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn into_bit_block(self, provenance: Provenance) -> BitBlock {
        BitBlock {
            bits: self.bits,
            stage: Stage::Secret,
            provenance,
        }
    }
}

impl PaParams {
    pub fn validate(&self) -> Result<(), PaError> {
        if self.poly.degree() as usize != self.n {
            return Err(PaError::BadPolynomial);
        }
        if self.m == 0 || self.m > self.n {
            return Err(PaError::BadOutputLength { n: self.n, m: self.m });
        }
        if self.pad_len >= self.n {
            return Err(PaError::Malformed("padding fills the whole block"));
        }
        for (v, len) in [(&self.multiplier, self.n), (&self.addend, self.m)] {
            if v.len() != len {
                return Err(PaError::LengthMismatch { expected: len, got: v.len() });
            }
        }
        Ok(())
    }

    /// Length of the corrected block before padding.
    pub fn block_len(&self) -> usize {
        self.n - self.pad_len
    }
}

/// Field product of two n-bit strings.
pub fn gf_mul(a: &[u8], b: &[u8], poly: &SparsePoly) -> Result<Vec<u8>, PaError> {
    let n = poly.degree() as usize;
    for v in [a, b] {
        if v.len() != n {
            return Err(PaError::LengthMismatch { expected: n, got: v.len() });
        }
    }
    let product = mul_mod(&bits::to_words(a), &bits::to_words(b), poly);
    Ok(bits::from_words(&product, n))
}

/// Draws hash parameters for a block of exactly `n` bits.
pub fn gen_pa_params(n: usize, m: usize, rng: &mut XorShift64Star) -> Result<PaParams, PaError> {
    let poly = poly_for(n).ok_or(PaError::UnsupportedSize(n))?;
    if m == 0 || m > n {
        return Err(PaError::BadOutputLength { n, m });
    }
    let multiplier = loop {
        let v = rng.bits(n);
        if bits::weight(&v) > 0 {
            break v;
        }
    };
    let addend = rng.bits(m);
    Ok(PaParams {
        n,
        m,
        pad_len: 0,
        poly,
        multiplier,
        addend,
    })
}

/// Draws parameters for a corrected block of `block_len` bits, padding it to
/// the next supported size.
pub fn gen_pa_params_for_block(
    block_len: usize,
    m: usize,
    rng: &mut XorShift64Star,
) -> Result<PaParams, PaError> {
    let n = size_for(block_len).ok_or(PaError::UnsupportedSize(block_len))?;
    if m > block_len {
        return Err(PaError::BadOutputLength { n: block_len, m });
    }
    let mut params = gen_pa_params(n, m, rng)?;
    params.pad_len = n - block_len;
    Ok(params)
}

/// Hashes `corrected` (exactly `n - pad_len` bits) down to `m` secret bits.
pub fn pa_hash(params: &PaParams, corrected: &[u8], lineage: Lineage) -> Result<SecretBlock, PaError> {
    params.validate()?;
    if corrected.len() != params.block_len() {
        return Err(PaError::LengthMismatch {
            expected: params.block_len(),
            got: corrected.len(),
        });
    }
    let mut words = bits::to_words(corrected);
    words.resize(words_for(params.n), 0);
    let product = mul_mod(&bits::to_words(&params.multiplier), &words, &params.poly);
    let mut out = bits::from_words(&product, params.m);
    for (o, a) in out.iter_mut().zip(&params.addend) {
        *o ^= a;
    }
    Ok(SecretBlock { bits: out, lineage })
}

/// PA_PARAMS payload:
///
/// ```text
/// u32 n | u32 m | u32 pad_len | u16 k | k x u32 exponents
///       | ceil(n/8) bytes multiplier | ceil(m/8) bytes addend
/// ```
///
/// All integers little-endian; bit strings packed LSB-first.
pub fn encode_params(params: &PaParams) -> Vec<u8> {
    let exps = params.poly.exponents();
    let mut out = Vec::with_capacity(14 + 4 * exps.len() + params.n / 8 + params.m / 8 + 2);
    out.extend_from_slice(&(params.n as u32).to_le_bytes());
    out.extend_from_slice(&(params.m as u32).to_le_bytes());
    out.extend_from_slice(&(params.pad_len as u32).to_le_bytes());
    out.extend_from_slice(&(exps.len() as u16).to_le_bytes());
    for &e in exps {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out.extend_from_slice(&bits::pack(&params.multiplier));
    out.extend_from_slice(&bits::pack(&params.addend));
    out
}

pub fn decode_params(payload: &[u8]) -> Result<PaParams, PaError> {
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8], PaError> {
        let s = payload
            .get(pos..pos + len)
            .ok_or(PaError::Malformed("truncated"))?;
        pos += len;
        Ok(s)
    };
    let u32_le = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let n = u32_le(take(4)?);
    let m = u32_le(take(4)?);
    let pad_len = u32_le(take(4)?);
    let k = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
    let mut exps = Vec::with_capacity(k);
    for _ in 0..k {
        exps.push(u32_le(take(4)?) as u32);
    }
    let poly = SparsePoly::new(exps).ok_or(PaError::BadPolynomial)?;
    if n == 0 || n > 1 << 20 || m > n {
        return Err(PaError::BadOutputLength { n, m });
    }
    let multiplier = bits::unpack(take(n.div_ceil(8))?, n);
    let addend = bits::unpack(take(m.div_ceil(8))?, m);
    if pos != payload.len() {
        return Err(PaError::Malformed("trailing bytes"));
    }
    let params = PaParams {
        n,
        m,
        pad_len,
        poly,
        multiplier,
        addend,
    };
    params.validate()?;
    Ok(params)
}

/// One golden-vector line: `exps | multiplier | input | m | output`, each
/// field lowercase hex. Exponents are comma separated; bit strings are packed
/// LSB-first; `m` is a plain hex integer.
pub fn golden_line(params: &PaParams, input: &[u8], output: &SecretBlock) -> String {
    let exps: Vec<String> = params
        .poly
        .exponents()
        .iter()
        .map(|e| format!("{e:x}"))
        .collect();
    format!(
        "{} | {} | {} | {:x} | {}",
        exps.join(","),
        bits::to_hex(&bits::pack(&params.multiplier)),
        bits::to_hex(&bits::pack(input)),
        params.m,
        bits::to_hex(&bits::pack(&output.bits)),
    )
}

/// A parsed golden-vector line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenVector {
    pub poly: SparsePoly,
    pub multiplier: Vec<u8>,
    pub input: Vec<u8>,
    pub m: usize,
    pub output: Vec<u8>,
}

pub fn parse_golden_line(line: &str) -> Option<GoldenVector> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    let [exps, mult, input, m, output] = fields[..] else {
        return None;
    };
    let exps = exps
        .split(',')
        .map(|e| u32::from_str_radix(e, 16).ok())
        .collect::<Option<Vec<_>>>()?;
    let poly = SparsePoly::new(exps)?;
    let n = poly.degree() as usize;
    let m = usize::from_str_radix(m, 16).ok()?;
    Some(GoldenVector {
        multiplier: bits::unpack(&bits::from_hex(mult)?, n),
        input: bits::unpack(&bits::from_hex(input)?, n),
        output: bits::unpack(&bits::from_hex(output)?, m),
        poly,
        m,
    })
}

impl GoldenVector {
    /// Recomputes the output with a zero addend, as the vectors are written.
    pub fn check(&self) -> bool {
        let n = self.poly.degree() as usize;
        let params = PaParams {
            n,
            m: self.m,
            pad_len: 0,
            poly: self.poly.clone(),
            multiplier: self.multiplier.clone(),
            addend: vec![0; self.m],
        };
        let lineage = Lineage { session_id: 0, block_id: 0 };
        pa_hash(&params, &self.input, lineage).is_ok_and(|s| s.bits == self.output)
    }
}
