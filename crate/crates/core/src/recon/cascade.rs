//! Cascade, driven by Bob.
//!
//! Bob asks for parities and Alice answers; Bob never sends parities of his
//! own, so every disclosed bit is one of Alice's answers. Each pass shuffles
//! the block with a permutation both sides derive from the shared seed,
//! splits it into blocks of `k1 * 2^pass` bits and compares top-level
//! parities. Every odd block is bisected until the error is found. Requests
//! at the same bisection level travel in one message, so one round trip
//! serves every search in flight.
//!
//! Correcting bit `j` flips the parity of each earlier-pass block holding
//! `j`. Bob remembers every parity Alice has told him, so he restarts the
//! search from the smallest remembered range around `j` whose parity now
//! disagrees (cascading back-correction).
//!
//! After the last pass the two sides compare a few parities over random
//! subsets of the whole block. A mismatch buys one more pass and a second
//! check; if that also fails the block is marked failed.

use std::collections::{HashMap, HashSet};

use super::{ReconError, ReconResult};
use crate::bits::{self, BitBlock, Provenance, Stage};
use crate::net::frame::MsgType;
use crate::net::payload::{self, Reader, Writer};
use crate::net::transport::{PublicChannel, Role, TransportError};
use crate::rng::{derive_seed, XorShift64Star};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeConfig {
    pub passes: usize,
    pub shuffle_seed: u64,
    /// Random-subset parities compared after the last pass.
    pub final_checks: usize,
}

impl CascadeConfig {
    pub fn new(shuffle_seed: u64) -> Self {
        Self {
            passes: 4,
            shuffle_seed,
            final_checks: 4,
        }
    }
}

/// First-pass block length: `clamp(round(0.73 / e), 8, b)`.
pub fn initial_block_len(est_error_rate: f64, b: usize) -> usize {
    let k = if est_error_rate > 0.0 {
        (0.73 / est_error_rate).round()
    } else {
        f64::INFINITY
    };
    (k.min(b as f64) as usize).max(8.min(b)).max(1)
}

/// Order in which pass `pass` visits the block: entry `i` is the original
/// index of the `i`-th bit.
pub fn pass_permutation(seed: u64, pass: usize, b: usize) -> Vec<u32> {
    XorShift64Star::new(derive_seed(seed, pass as u64))
        .permutation(b)
        .into_iter()
        .map(|i| i as u32)
        .collect()
}

fn check_subset(seed: u64, round: u64, index: u64, b: usize) -> Vec<u8> {
    let tag = 0xC0DE_0000_0000 | round << 16 | index;
    XorShift64Star::new(derive_seed(seed, tag)).bits(b)
}

/// One range of pass positions `[start, end)` in a given pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Range {
    pub pass: u32,
    pub start: u32,
    pub end: u32,
}

impl Range {
    fn len(&self) -> u32 {
        self.end - self.start
    }

    fn mid(&self) -> u32 {
        self.start + self.len() / 2
    }

    fn left(&self) -> Range {
        Range { end: self.mid(), ..*self }
    }

    fn right(&self) -> Range {
        Range { start: self.mid(), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Ranges(Vec<Range>),
    Check { round: u64, count: u64 },
}

impl Request {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Request::Ranges(ranges) => {
                w.u8(0).varint(ranges.len() as u64);
                for r in ranges {
                    w.varint(r.pass as u64)
                        .varint(r.start as u64)
                        .varint(r.len() as u64);
                }
            }
            Request::Check { round, count } => {
                w.u8(1).varint(*round).varint(*count);
            }
        }
        w.finish()
    }

    pub fn decode(payload: &[u8], b: usize, max_pass: usize) -> payload::ReadResult<Self> {
        let mut r = Reader::new(payload);
        let req = match r.u8()? {
            0 => {
                let n = r.count(payload.len())?;
                let mut ranges = Vec::with_capacity(n);
                for _ in 0..n {
                    let pass = r.count(max_pass)? as u32;
                    let start = r.count(b)? as u32;
                    let len = r.count(b)? as u32;
                    if len == 0 || (start + len) as usize > b {
                        return Err("range outside block");
                    }
                    ranges.push(Range { pass, start, end: start + len });
                }
                Request::Ranges(ranges)
            }
            1 => Request::Check {
                round: r.varint()?,
                count: r.count(64)? as u64,
            },
            _ => return Err("unknown request kind"),
        };
        r.finish()?;
        Ok(req)
    }
}

const ACK_OK: u8 = 0;
const ACK_FAILED: u8 = 1;

/// Alice's half: answers parity requests about her block.
struct AliceSide<'a> {
    bits: &'a [u8],
    seed: u64,
    max_pass: usize,
    perms: HashMap<u32, Vec<u32>>,
}

impl AliceSide<'_> {
    fn answer(&mut self, ch: &mut impl PublicChannel) -> Result<(), ReconError> {
        let payload = ch.recv(Role::Alice, MsgType::EcCascadeParities)?;
        let req = Request::decode(&payload, self.bits.len(), self.max_pass)
            .map_err(|r| TransportError::payload(MsgType::EcCascadeParities, r))?;
        let parities: Vec<u8> = match req {
            Request::Ranges(ranges) => ranges
                .iter()
                .map(|r| {
                    let (bits, seed) = (self.bits, self.seed);
                    let perm = self
                        .perms
                        .entry(r.pass)
                        .or_insert_with(|| pass_permutation(seed, r.pass as usize, bits.len()));
                    perm[r.start as usize..r.end as usize]
                        .iter()
                        .fold(0u8, |acc, &i| acc ^ bits[i as usize])
                })
                .collect(),
            Request::Check { round, count } => (0..count)
                .map(|i| {
                    let mask = check_subset(self.seed, round, i, self.bits.len());
                    bits::parity_of(self.bits, (0..self.bits.len()).filter(|&j| mask[j] == 1))
                })
                .collect(),
        };
        ch.send(Role::Alice, MsgType::EcCascadeReply, payload::encode_bits(&parities))?;
        Ok(())
    }

    fn finish(&mut self, ch: &mut impl PublicChannel) -> Result<bool, ReconError> {
        let payload = ch.recv(Role::Alice, MsgType::EcAck)?;
        match payload.as_slice() {
            [ACK_OK] => Ok(true),
            [ACK_FAILED] => Ok(false),
            _ => Err(TransportError::payload(MsgType::EcAck, "bad status").into()),
        }
    }
}

struct Pass {
    perm: Vec<u32>,
    pos: Vec<u32>,
    block: usize,
    /// Alice's parities, by `(start, end)`.
    known: HashMap<(u32, u32), u8>,
}

/// Bob's half: owns the working copy of his block and drives the protocol.
struct BobSide {
    bits: Vec<u8>,
    seed: u64,
    k1: usize,
    passes: Vec<Pass>,
    round_trips: usize,
    disclosed: usize,
}

impl BobSide {
    fn b(&self) -> usize {
        self.bits.len()
    }

    fn parity(&self, r: Range) -> u8 {
        let perm = &self.passes[r.pass as usize].perm;
        perm[r.start as usize..r.end as usize]
            .iter()
            .fold(0u8, |acc, &i| acc ^ self.bits[i as usize])
    }

    fn known(&self, r: Range) -> Option<u8> {
        self.passes[r.pass as usize].known.get(&(r.start, r.end)).copied()
    }

    fn mismatched(&self, r: Range) -> bool {
        self.known(r).is_some_and(|a| a != self.parity(r))
    }

    fn ask(
        &mut self,
        req: Request,
        alice: &mut AliceSide,
        ch: &mut impl PublicChannel,
    ) -> Result<Vec<u8>, ReconError> {
        let expected = match &req {
            Request::Ranges(r) => r.len(),
            Request::Check { count, .. } => *count as usize,
        };
        ch.send(Role::Bob, MsgType::EcCascadeParities, req.encode())?;
        alice.answer(ch)?;
        let reply = payload::decode_bits(&ch.recv(Role::Bob, MsgType::EcCascadeReply)?)
            .map_err(|r| TransportError::payload(MsgType::EcCascadeReply, r))?;
        if reply.len() != expected {
            return Err(TransportError::payload(MsgType::EcCascadeReply, "wrong parity count").into());
        }
        self.round_trips += 1;
        self.disclosed += reply.len();
        Ok(reply)
    }

    /// Flips original bit `j` and returns the searches it reopens in every
    /// started pass other than `found_in`.
    fn correct(&mut self, j: u32, found_in: u32) -> Vec<Range> {
        self.bits[j as usize] ^= 1;
        let mut reopened = Vec::new();
        for q in 0..self.passes.len() as u32 {
            if q == found_in {
                continue;
            }
            let pass = &self.passes[q as usize];
            let x = pass.pos[j as usize];
            let start = x - x % pass.block as u32;
            let mut node = Range {
                pass: q,
                start,
                end: (start + pass.block as u32).min(self.b() as u32),
            };
            let mut deepest = None;
            loop {
                if self.mismatched(node) {
                    deepest = Some(node);
                }
                if node.len() < 2 || self.known(node.left()).is_none() {
                    break;
                }
                node = if x < node.mid() { node.left() } else { node.right() };
            }
            reopened.extend(deepest);
        }
        reopened
    }

    /// Runs bisections until every odd range has been resolved.
    fn resolve(
        &mut self,
        mut active: Vec<Range>,
        alice: &mut AliceSide,
        ch: &mut impl PublicChannel,
    ) -> Result<(), ReconError> {
        loop {
            let mut waiting = Vec::new();
            let mut queue = std::mem::take(&mut active);
            while let Some(mut s) = queue.pop() {
                if !self.mismatched(s) {
                    continue;
                }
                loop {
                    if s.len() == 1 {
                        let j = self.passes[s.pass as usize].perm[s.start as usize];
                        queue.extend(self.correct(j, s.pass));
                        break;
                    }
                    match self.known(s.left()) {
                        Some(a) if a != self.parity(s.left()) => s = s.left(),
                        Some(_) => s = s.right(),
                        None => {
                            waiting.push(s);
                            break;
                        }
                    }
                }
            }
            let mut seen = HashSet::new();
            waiting.retain(|s| seen.insert(*s));
            waiting.sort_by_key(|s| (s.pass, s.start));
            if waiting.is_empty() {
                return Ok(());
            }
            let mut asked = HashSet::new();
            let lefts: Vec<Range> = waiting
                .iter()
                .map(|s| s.left())
                .filter(|l| asked.insert(*l))
                .collect();
            let reply = self.ask(Request::Ranges(lefts.clone()), alice, ch)?;
            for (l, &a) in lefts.iter().zip(&reply) {
                self.passes[l.pass as usize].known.insert((l.start, l.end), a);
            }
            for s in &waiting {
                let (l, r) = (s.left(), s.right());
                let parent = self.known(*s).expect("active ranges are known");
                let left = self.known(l).expect("just answered");
                self.passes[s.pass as usize]
                    .known
                    .insert((r.start, r.end), parent ^ left);
            }
            // Searches in `waiting` resume from their parents; the next
            // sweep descends through the freshly cached halves.
            active = waiting;
        }
    }

    fn run_pass(&mut self, alice: &mut AliceSide, ch: &mut impl PublicChannel) -> Result<(), ReconError> {
        let index = self.passes.len();
        let b = self.b();
        let perm = pass_permutation(self.seed, index, b);
        let mut pos = vec![0u32; b];
        for (i, &j) in perm.iter().enumerate() {
            pos[j as usize] = i as u32;
        }
        let block = self.k1.saturating_mul(1 << index.min(32)).min(b);
        self.passes.push(Pass {
            perm,
            pos,
            block,
            known: HashMap::new(),
        });
        let tops: Vec<Range> = (0..b)
            .step_by(block)
            .map(|s| Range {
                pass: index as u32,
                start: s as u32,
                end: (s + block).min(b) as u32,
            })
            .collect();
        let reply = self.ask(Request::Ranges(tops.clone()), alice, ch)?;
        for (t, &a) in tops.iter().zip(&reply) {
            self.passes[index].known.insert((t.start, t.end), a);
        }
        let odd: Vec<Range> = tops.into_iter().filter(|&t| self.mismatched(t)).collect();
        self.resolve(odd, alice, ch)
    }

    fn final_check(
        &mut self,
        round: u64,
        count: usize,
        alice: &mut AliceSide,
        ch: &mut impl PublicChannel,
    ) -> Result<bool, ReconError> {
        if count == 0 {
            return Ok(true);
        }
        let reply = self.ask(Request::Check { round, count: count as u64 }, alice, ch)?;
        let b = self.b();
        Ok((0..count as u64).zip(&reply).all(|(i, &a)| {
            let mask = check_subset(self.seed, round, i, b);
            bits::parity_of(&self.bits, (0..b).filter(|&j| mask[j] == 1)) == a
        }))
    }
}

/// Reconciles `bob_bits` to `alice_bits` with Cascade over `ch`.
pub fn cascade_run(
    alice_bits: &[u8],
    bob_bits: &[u8],
    est_error_rate: f64,
    cfg: &CascadeConfig,
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
    if cfg.passes < 2 {
        return Err(ReconError::InvalidConfig("Cascade needs at least two passes"));
    }
    let b = alice_bits.len();
    let bytes_before = ch.bytes_sent();
    let mut alice = AliceSide {
        bits: alice_bits,
        seed: cfg.shuffle_seed,
        max_pass: cfg.passes,
        perms: HashMap::new(),
    };
    let mut bob = BobSide {
        bits: bob_bits.to_vec(),
        seed: cfg.shuffle_seed,
        k1: initial_block_len(est_error_rate, b),
        passes: Vec::new(),
        round_trips: 0,
        disclosed: 0,
    };
    let mut ok = true;
    if b > 0 {
        for _ in 0..cfg.passes {
            bob.run_pass(&mut alice, ch)?;
        }
        ok = bob.final_check(0, cfg.final_checks, &mut alice, ch)?;
        if !ok {
            bob.run_pass(&mut alice, ch)?;
            ok = bob.final_check(1, cfg.final_checks, &mut alice, ch)?;
        }
    }
    ch.send(Role::Bob, MsgType::EcAck, vec![if ok { ACK_OK } else { ACK_FAILED }])?;
    let alice_ok = alice.finish(ch)?;
    debug_assert_eq!(alice_ok, ok);

    let e = bits::hamming(bob_bits, &bob.bits);
    let provenance = Provenance {
        b: b as u64,
        e: e as u64,
        d: bob.disclosed as u64,
    };
    Ok(ReconResult {
        alice: BitBlock {
            bits: alice_bits.to_vec(),
            stage: Stage::Corrected,
            provenance,
        },
        bob: BitBlock {
            bits: bob.bits,
            stage: Stage::Corrected,
            provenance,
        },
        disclosed_bits_d: bob.disclosed,
        measured_error_count_e: e,
        round_trips: bob.round_trips,
        bytes_exchanged: ch.bytes_sent() - bytes_before,
        failed: !ok,
    })
}
