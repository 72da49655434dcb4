//! Niagara: one-way LDPC reconciliation.
//!
//! The code is systematic. The `b` data columns carry `density` ones on
//! average, spread by a greedy, seeded construction; the `p` parity columns form a
//! staircase (row `j` touches parity columns `j` and `j - 1`), which makes
//! encoding linear-time. Alice discloses the syndrome of her block against
//! the data part, which carries the same information as the staircase
//! parity bits. Bob runs log-domain sum-product decoding for at most
//! `max_iters` iterations and acknowledges success or failure.

use super::shannon::h2;
use super::{ReconError, ReconResult};
use crate::bits::{self, BitBlock, Provenance, Stage};
use crate::net::frame::MsgType;
use crate::net::payload::{Reader, Writer};
use crate::net::transport::{PublicChannel, Role, TransportError};
use crate::rng::XorShift64Star;

/// Parity checks per data bit.
pub const DENSITY: usize = 5;
pub const MAX_ITERS: usize = 20;
pub const NOISE_MARGIN: f64 = 0.002;
pub const CODE_MARGIN: f64 = 0.2;
const LLR_CLAMP: f64 = 25.0;
/// Four fifths of the data columns sit in 3 checks; the rest take 13 or 14
/// so the mean stays at `DENSITY`. At b = 4096, e = 3%, p = 1005 this
/// decodes where the regular weight-5 code almost never does.
const LOW_DEGREES: &[(usize, f64)] = &[(3, 0.8)];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodeError {
    #[error("parity count {p} must satisfy {density} <= p < b = {b}")]
    Infeasible { b: usize, p: usize, density: usize },
    #[error("density must be {DENSITY}, got {0}")]
    Density(usize),
    #[error("expected {expected} bits, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("error rate {0} plus margin leaves no usable code rate")]
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NiagaraCodeSpec {
    pub b: usize,
    pub p: usize,
    pub density: usize,
    pub seed: u64,
}

impl NiagaraCodeSpec {
    pub fn new(b: usize, p: usize, seed: u64) -> Self {
        Self {
            b,
            p,
            density: DENSITY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CodeError> {
        if self.density != DENSITY {
            return Err(CodeError::Density(self.density));
        }
        if self.p < self.density || self.p >= self.b {
            return Err(CodeError::Infeasible {
                b: self.b,
                p: self.p,
                density: self.density,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseParityMatrix {
    pub b: usize,
    pub p: usize,
    /// Sorted column indices in `[0, b + p)` per check.
    pub rows: Vec<Vec<u32>>,
    /// Number of data columns at the front of each row.
    data_len: Vec<usize>,
    /// Checks touching each data column.
    cols: Vec<Vec<u32>>,
}

impl SparseParityMatrix {
    pub fn data_row(&self, j: usize) -> &[u32] {
        &self.rows[j][..self.data_len[j]]
    }

    pub fn data_col(&self, i: usize) -> &[u32] {
        &self.cols[i]
    }

    pub fn mean_column_weight(&self) -> f64 {
        self.cols.iter().map(Vec::len).sum::<usize>() as f64 / self.b as f64
    }

    /// Pairs of data columns sharing two or more checks.
    pub fn four_cycles(&self) -> usize {
        let mut count = 0;
        let mut seen = vec![u32::MAX; self.b];
        for (i, col) in self.cols.iter().enumerate() {
            let mut hits = std::collections::HashMap::new();
            for &r in col {
                for &k in self.data_row(r as usize) {
                    if (k as usize) > i {
                        *hits.entry(k).or_insert(0) += 1;
                    }
                }
            }
            for (k, n) in hits {
                if n >= 2 && seen[k as usize] != i as u32 {
                    seen[k as usize] = i as u32;
                    count += 1;
                }
            }
        }
        count
    }
}

/// `p = ceil(h2(e + noise_margin) * b * (1 + code_margin))`.
pub fn parity_count_with(e_rate: f64, b: usize, noise_margin: f64, code_margin: f64) -> Result<usize, CodeError> {
    let x = e_rate + noise_margin;
    if !(e_rate > 0.0 && x < 0.5) {
        return Err(CodeError::Rate(e_rate));
    }
    Ok((h2(x) * b as f64 * (1.0 + code_margin)).ceil() as usize)
}

pub fn choose_parity_count(e_rate: f64, b: usize) -> Result<usize, CodeError> {
    parity_count_with(e_rate, b, NOISE_MARGIN, CODE_MARGIN)
}

/// Builds the code for `spec`.
///
/// Columns are visited in a seeded order, heaviest first. Each picks its
/// checks one at a time, preferring the check with the fewest ones so far
/// and scanning from a seeded offset. A check is skipped if it already
/// shares a column with a check this column holds (that would close a
/// 4-cycle). When every remaining check is excluded the cycle is accepted.
pub fn build_code(spec: &NiagaraCodeSpec) -> Result<SparseParityMatrix, CodeError> {
    build_code_with(spec, LOW_DEGREES)
}

/// Column degrees: `low` gives (degree, fraction of columns) pairs, the
/// remaining columns share whatever keeps the mean at exactly `density`.
pub fn column_degrees(b: usize, density: usize, low: &[(usize, f64)]) -> Vec<usize> {
    let mut degrees = Vec::with_capacity(b);
    for &(d, f) in low {
        let n = ((f * b as f64).round() as usize).min(b - degrees.len());
        degrees.extend(std::iter::repeat_n(d, n));
    }
    let rest = b - degrees.len();
    if rest > 0 {
        let edges = (density * b).saturating_sub(degrees.iter().sum::<usize>());
        let (base, extra) = (edges / rest, edges % rest);
        degrees.extend((0..rest).map(|i| base + usize::from(i < extra)));
    }
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    degrees
}

fn build_code_with(spec: &NiagaraCodeSpec, low: &[(usize, f64)]) -> Result<SparseParityMatrix, CodeError> {
    spec.validate()?;
    let (b, p) = (spec.b, spec.p);
    let mut g = XorShift64Star::new(spec.seed);
    let degrees = column_degrees(b, spec.density, low);
    let order = g.permutation(b);
    let mut data_rows: Vec<Vec<u32>> = vec![Vec::new(); p];
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); b];
    let mut blocked = vec![0u32; p];
    for (n, (&i, &degree)) in order.iter().zip(&degrees).enumerate() {
        let epoch = n as u32 + 1;
        let mut chosen: Vec<u32> = Vec::with_capacity(degree);
        for _ in 0..degree.min(p) {
            let offset = g.below(p as u64) as usize;
            let pick = |avoid_cycles: bool| {
                let mut best: Option<usize> = None;
                for step in 0..p {
                    let r = (offset + step) % p;
                    let excluded = chosen.contains(&(r as u32)) || (avoid_cycles && blocked[r] == epoch);
                    if !excluded && best.is_none_or(|m| data_rows[r].len() < data_rows[m].len()) {
                        best = Some(r);
                    }
                }
                best
            };
            let Some(r) = pick(true).or_else(|| pick(false)) else { break };
            blocked[r] = epoch;
            for &k in &data_rows[r] {
                for &rr in &cols[k as usize] {
                    blocked[rr as usize] = epoch;
                }
            }
            chosen.push(r as u32);
            data_rows[r].push(i as u32);
        }
        chosen.sort_unstable();
        cols[i] = chosen;
    }
    let mut rows = Vec::with_capacity(p);
    let mut data_len = Vec::with_capacity(p);
    for (j, mut r) in data_rows.into_iter().enumerate() {
        r.sort_unstable();
        data_len.push(r.len());
        if j > 0 {
            r.push((b + j - 1) as u32);
        }
        r.push((b + j) as u32);
        rows.push(r);
    }
    Ok(SparseParityMatrix {
        b,
        p,
        rows,
        data_len,
        cols,
    })
}

/// Syndrome of `bits` against the data part of `matrix`.
pub fn niagara_encode(matrix: &SparseParityMatrix, bits: &[u8]) -> Result<Vec<u8>, CodeError> {
    if bits.len() != matrix.b {
        return Err(CodeError::SizeMismatch {
            expected: matrix.b,
            got: bits.len(),
        });
    }
    Ok((0..matrix.p)
        .map(|j| matrix.data_row(j).iter().fold(0u8, |acc, &i| acc ^ bits[i as usize]))
        .collect())
}

/// Staircase parity bits: the check bits a systematic encoder would append.
pub fn staircase_parities(syndrome: &[u8]) -> Vec<u8> {
    let mut acc = 0u8;
    syndrome
        .iter()
        .map(|&s| {
            acc ^= s;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sum-product decoding did not converge in {iterations} iterations")]
pub struct DecodeFailure {
    pub iterations: usize,
}

fn half_tanh(llr: f64) -> f64 {
    (llr.clamp(-LLR_CLAMP, LLR_CLAMP) / 2.0).tanh()
}

fn syndrome_matches(matrix: &SparseParityMatrix, bits: &[u8], syndrome: &[u8]) -> bool {
    (0..matrix.p).all(|j| matrix.data_row(j).iter().fold(0u8, |acc, &i| acc ^ bits[i as usize]) == syndrome[j])
}

/// Sum-product decoding in the log-likelihood-ratio domain.
pub fn niagara_decode(
    matrix: &SparseParityMatrix,
    syndrome: &[u8],
    bob_bits: &[u8],
    channel_error_rate: f64,
    max_iters: usize,
) -> Result<Result<Decoded, DecodeFailure>, CodeError> {
    if bob_bits.len() != matrix.b {
        return Err(CodeError::SizeMismatch {
            expected: matrix.b,
            got: bob_bits.len(),
        });
    }
    if syndrome.len() != matrix.p {
        return Err(CodeError::SizeMismatch {
            expected: matrix.p,
            got: syndrome.len(),
        });
    }
    let mut hard = bob_bits.to_vec();
    if syndrome_matches(matrix, &hard, syndrome) {
        return Ok(Ok(Decoded {
            bits: hard,
            iterations: 0,
        }));
    }

    let q = channel_error_rate.clamp(1e-9, 0.5 - 1e-9);
    let base = ((1.0 - q) / q).ln();
    let prior: Vec<f64> = bob_bits.iter().map(|&y| if y == 1 { -base } else { base }).collect();

    let mut row_start = Vec::with_capacity(matrix.p + 1);
    let mut edge_var = Vec::new();
    for j in 0..matrix.p {
        row_start.push(edge_var.len());
        edge_var.extend_from_slice(matrix.data_row(j));
    }
    row_start.push(edge_var.len());

    // Row-serial schedule: each check sees the updates of the checks
    // before it in the same iteration. `total` must stay exactly
    // prior + sum of incoming check messages, so only the tanh inputs and
    // the check messages are clamped.
    let mut total = prior.clone();
    let mut c2v = vec![0.0f64; edge_var.len()];
    let mut v2c = Vec::new();
    let mut suffix = Vec::new();
    for iter in 1..=max_iters {
        for j in 0..matrix.p {
            let (lo, hi) = (row_start[j], row_start[j + 1]);
            let sign = if syndrome[j] == 1 { -1.0 } else { 1.0 };
            v2c.clear();
            v2c.extend((lo..hi).map(|e| total[edge_var[e] as usize] - c2v[e]));
            suffix.clear();
            suffix.resize(v2c.len() + 1, 1.0);
            for k in (0..v2c.len()).rev() {
                suffix[k] = suffix[k + 1] * half_tanh(v2c[k]);
            }
            let mut prefix = 1.0;
            for (k, &m) in v2c.iter().enumerate() {
                let prod = (prefix * suffix[k + 1]).clamp(-1.0, 1.0);
                let msg = (sign * 2.0 * prod.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                c2v[lo + k] = msg;
                total[edge_var[lo + k] as usize] = m + msg;
                prefix *= half_tanh(m);
            }
        }
        for (h, &t) in hard.iter_mut().zip(&total) {
            *h = u8::from(t < 0.0);
        }
        if syndrome_matches(matrix, &hard, syndrome) {
            return Ok(Ok(Decoded {
                bits: hard,
                iterations: iter,
            }));
        }
    }
    Ok(Err(DecodeFailure {
        iterations: max_iters,
    }))
}

const ACK_OK: u8 = 0;
const ACK_FAILED: u8 = 1;

pub fn encode_syndrome_message(spec: &NiagaraCodeSpec, syndrome: &[u8]) -> Vec<u8> {
    Writer::new()
        .u32(spec.b as u32)
        .u32(spec.p as u32)
        .u64(spec.seed)
        .bits(syndrome)
        .finish()
}

pub fn decode_syndrome_message(payload: &[u8]) -> Result<(NiagaraCodeSpec, Vec<u8>), &'static str> {
    let mut r = Reader::new(payload);
    let b = r.u32()? as usize;
    let p = r.u32()? as usize;
    let seed = r.u64()?;
    let syndrome = r.bits()?;
    r.finish()?;
    if syndrome.len() != p {
        return Err("syndrome length differs from p");
    }
    Ok((NiagaraCodeSpec::new(b, p, seed), syndrome))
}

/// One-way reconciliation: Alice sends her syndrome, Bob decodes and acks.
pub fn niagara_run(
    alice_bits: &[u8],
    bob_bits: &[u8],
    est_error_rate: f64,
    code_seed: u64,
    ch: &mut impl PublicChannel,
) -> Result<ReconResult, ReconError> {
    if alice_bits.len() != bob_bits.len() {
        return Err(ReconError::LengthMismatch {
            alice: alice_bits.len(),
            bob: bob_bits.len(),
        });
    }
    if !(0.0..0.5).contains(&est_error_rate) {
        return Err(ReconError::InvalidErrorRate(est_error_rate));
    }
    let b = alice_bits.len();
    let bytes_before = ch.bytes_sent();

    // Alice.
    let p = choose_parity_count(est_error_rate.max(f64::MIN_POSITIVE), b)?;
    let spec = NiagaraCodeSpec::new(b, p, code_seed);
    let matrix = build_code(&spec)?;
    let syndrome = niagara_encode(&matrix, alice_bits)?;
    ch.send(Role::Alice, MsgType::EcNiagaraSyndrome, encode_syndrome_message(&spec, &syndrome))?;

    // Bob rebuilds the code from the announced parameters.
    let payload = ch.recv(Role::Bob, MsgType::EcNiagaraSyndrome)?;
    let (bob_spec, bob_syndrome) = decode_syndrome_message(&payload)
        .map_err(|r| TransportError::payload(MsgType::EcNiagaraSyndrome, r))?;
    if bob_spec.b != b {
        return Err(TransportError::payload(MsgType::EcNiagaraSyndrome, "block size differs").into());
    }
    let bob_matrix = if bob_spec == spec { matrix } else { build_code(&bob_spec)? };
    let decoded = niagara_decode(&bob_matrix, &bob_syndrome, bob_bits, est_error_rate, MAX_ITERS)?;
    let ok = decoded.is_ok();
    ch.send(Role::Bob, MsgType::EcAck, vec![if ok { ACK_OK } else { ACK_FAILED }])?;

    let ack = ch.recv(Role::Alice, MsgType::EcAck)?;
    if !matches!(ack.as_slice(), [ACK_OK] | [ACK_FAILED]) {
        return Err(TransportError::payload(MsgType::EcAck, "bad status").into());
    }

    let corrected = match decoded {
        Ok(d) => d.bits,
        Err(_) => bob_bits.to_vec(),
    };
    let e = if ok { bits::hamming(bob_bits, &corrected) } else { 0 };
    let provenance = Provenance {
        b: b as u64,
        e: e as u64,
        d: bob_spec.p as u64,
    };
    Ok(ReconResult {
        alice: BitBlock {
            bits: alice_bits.to_vec(),
            stage: Stage::Corrected,
            provenance,
        },
        bob: BitBlock {
            bits: corrected,
            stage: Stage::Corrected,
            provenance,
        },
        disclosed_bits_d: bob_spec.p,
        measured_error_count_e: e,
        round_trips: 1,
        bytes_exchanged: ch.bytes_sent() - bytes_before,
        failed: !ok,
    })
}
