//! Sifting: turning raw detection records into matching sifted blocks.
//!
//! Both protocols open the same way. Bob drops every slot where zero or both
//! of his detectors fired and announces the remaining slot numbers
//! (SIFT_DETECT). Then:
//!
//! * classic BB84: Bob announces his bases (SIFT_BASES) and Alice answers
//!   with a keep flag per slot (SIFT_KEEP), set where the bases agree and she
//!   holds a value.
//! * SARG04: Alice announces, per slot, two non-orthogonal states, her real
//!   one and a random state from the conjugate basis (SIFT_SARG_PAIRS). Bob
//!   keeps the slot when his outcome rules out exactly one of them, takes the
//!   other as Alice's state, and reports his keep flags (SIFT_KEEP).
//!
//! States are numbered `2 * basis + bit`, so a pair always lists its Z state
//! first; the wire carries the two bit values in that order.

use thiserror::Error;

use crate::bits::Stage;
use crate::net::frame::MsgType;
use crate::net::payload::{self, Reader, Writer};
use crate::net::transport::{PublicChannel, Role, TransportError};
use crate::qchan::{AliceSlot, BobSlot};
use crate::rng::XorShift64Star;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    NoDetection,
    WrongBasis,
    MultipleDetection,
    /// SARG04 slot whose outcome was compatible with both announced states.
    Inconclusive,
    Kept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftOutcome {
    pub slot: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftedBlock {
    pub bits: Vec<u8>,
    pub slot_map: Vec<u64>,
}

impl SiftedBlock {
    pub fn stage(&self) -> Stage {
        Stage::Sifted
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftResult {
    pub alice: SiftedBlock,
    pub bob: SiftedBlock,
    /// One verdict per input slot.
    pub outcomes: Vec<SiftOutcome>,
}

impl SiftResult {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.outcomes.iter().filter(|o| o.verdict == verdict).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SiftError {
    #[error("records cover different slot ranges")]
    SlotRangeMismatch,
    #[error("announced slot {0} is outside the local record")]
    UnknownSlot(u64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftVariant {
    Classic,
    Sarg,
}

impl std::str::FromStr for SiftVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" | "bb84" => Ok(SiftVariant::Classic),
            "sarg" | "sarg04" => Ok(SiftVariant::Sarg),
            _ => Err(format!("unknown sift variant `{s}` (expected classic or sarg)")),
        }
    }
}

impl std::fmt::Display for SiftVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SiftVariant::Classic => "classic",
            SiftVariant::Sarg => "sarg",
        })
    }
}

fn check_ranges(alice: &[AliceSlot], bob: &[BobSlot]) -> Result<(), SiftError> {
    let same = alice.len() == bob.len()
        && alice.first().map(|s| s.slot) == bob.first().map(|s| s.slot)
        && alice.last().map(|s| s.slot) == bob.last().map(|s| s.slot);
    if same {
        Ok(())
    } else {
        Err(SiftError::SlotRangeMismatch)
    }
}

fn bad(msg_type: MsgType, reason: &'static str) -> SiftError {
    TransportError::payload(msg_type, reason).into()
}

fn lookup(alice: &[AliceSlot], slot: u64) -> Result<&AliceSlot, SiftError> {
    alice
        .binary_search_by_key(&slot, |s| s.slot)
        .map(|i| &alice[i])
        .map_err(|_| SiftError::UnknownSlot(slot))
}

/// Bob's first move, shared by both protocols: the single-click slots.
fn announce_detections(bob: &[BobSlot], ch: &mut impl PublicChannel) -> Result<Vec<usize>, SiftError> {
    let detected: Vec<usize> = (0..bob.len()).filter(|&i| bob[i].bit().is_some()).collect();
    let slots: Vec<u64> = detected.iter().map(|&i| bob[i].slot).collect();
    let first = bob.first().map_or(0, |s| s.slot);
    ch.send(Role::Bob, MsgType::SiftDetect, payload::encode_slots(first, &slots))?;
    Ok(detected)
}

fn receive_detections<'a>(
    alice: &'a [AliceSlot],
    ch: &mut impl PublicChannel,
) -> Result<Vec<&'a AliceSlot>, SiftError> {
    let (_, slots) = payload::decode_slots(&ch.recv(Role::Alice, MsgType::SiftDetect)?)
        .map_err(|r| bad(MsgType::SiftDetect, r))?;
    slots.iter().map(|&s| lookup(alice, s)).collect()
}

fn base_outcomes(bob: &[BobSlot]) -> Vec<SiftOutcome> {
    bob.iter()
        .map(|s| SiftOutcome {
            slot: s.slot,
            verdict: match s.fire_mask.0 & 0b11 {
                0 => Verdict::NoDetection,
                0b11 => Verdict::MultipleDetection,
                _ => Verdict::WrongBasis,
            },
        })
        .collect()
}

/// Classic BB84 sifting over `ch`.
pub fn classic_sift(
    alice: &[AliceSlot],
    bob: &[BobSlot],
    ch: &mut impl PublicChannel,
) -> Result<SiftResult, SiftError> {
    check_ranges(alice, bob)?;
    let mut outcomes = base_outcomes(bob);

    let detected = announce_detections(bob, ch)?;
    let announced = receive_detections(alice, ch)?;
    if announced.is_empty() {
        return Ok(SiftResult {
            alice: SiftedBlock::default(),
            bob: SiftedBlock::default(),
            outcomes,
        });
    }

    let bases: Vec<u8> = detected.iter().map(|&i| bob[i].basis).collect();
    ch.send(Role::Bob, MsgType::SiftBases, payload::encode_bits(&bases))?;

    let bob_bases = payload::decode_bits(&ch.recv(Role::Alice, MsgType::SiftBases)?)
        .map_err(|r| bad(MsgType::SiftBases, r))?;
    if bob_bases.len() != announced.len() {
        return Err(bad(MsgType::SiftBases, "basis count differs from detection count"));
    }
    let keep: Vec<u8> = announced
        .iter()
        .zip(&bob_bases)
        .map(|(a, &b)| (a.bit.is_some() && a.basis == b) as u8)
        .collect();
    ch.send(Role::Alice, MsgType::SiftKeep, payload::encode_bits(&keep))?;
    let mut alice_block = SiftedBlock::default();
    for (a, &k) in announced.iter().zip(&keep) {
        if k == 1 {
            alice_block.bits.push(a.bit.expect("kept slots carry a value"));
            alice_block.slot_map.push(a.slot);
        }
    }

    let keep = payload::decode_bits(&ch.recv(Role::Bob, MsgType::SiftKeep)?)
        .map_err(|r| bad(MsgType::SiftKeep, r))?;
    if keep.len() != detected.len() {
        return Err(bad(MsgType::SiftKeep, "keep flag count differs from detection count"));
    }
    let mut bob_block = SiftedBlock::default();
    for (&i, &k) in detected.iter().zip(&keep) {
        if k == 1 {
            bob_block.bits.push(bob[i].bit().expect("announced slots are single clicks"));
            bob_block.slot_map.push(bob[i].slot);
            outcomes[i].verdict = Verdict::Kept;
        } else if alice[i].bit.is_none() {
            outcomes[i].verdict = Verdict::NoDetection;
        }
    }
    Ok(SiftResult {
        alice: alice_block,
        bob: bob_block,
        outcomes,
    })
}

/// Bob's SARG04 decision for one slot: `Some(inferred_bit)` when his outcome
/// in `basis` rules out exactly one of the announced states.
pub fn sarg_decide(basis: u8, outcome: u8, z_bit: u8, x_bit: u8) -> Option<u8> {
    let (same, other) = if basis == 0 { (z_bit, x_bit) } else { (x_bit, z_bit) };
    (same != outcome).then_some(other)
}

fn decode_pairs(payload: &[u8]) -> payload::ReadResult<(Vec<u8>, Vec<u8>)> {
    let mut r = Reader::new(payload);
    let valid = r.bits()?;
    let pairs = r.bits()?;
    r.finish()?;
    Ok((valid, pairs))
}

/// SARG04 sifting over `ch`; `seed` drives Alice's decoy choices.
pub fn sarg_sift(
    alice: &[AliceSlot],
    bob: &[BobSlot],
    seed: u64,
    ch: &mut impl PublicChannel,
) -> Result<SiftResult, SiftError> {
    check_ranges(alice, bob)?;
    let mut outcomes = base_outcomes(bob);

    let detected = announce_detections(bob, ch)?;
    let announced = receive_detections(alice, ch)?;
    if announced.is_empty() {
        return Ok(SiftResult {
            alice: SiftedBlock::default(),
            bob: SiftedBlock::default(),
            outcomes,
        });
    }

    let mut rng = XorShift64Star::new(seed);
    let valid: Vec<u8> = announced.iter().map(|a| a.bit.is_some() as u8).collect();
    let mut pairs = Vec::new();
    for a in announced.iter() {
        let Some(bit) = a.bit else { continue };
        let decoy = rng.next_bit();
        let (z, x) = if a.basis == 0 { (bit, decoy) } else { (decoy, bit) };
        pairs.push(z);
        pairs.push(x);
    }
    ch.send(
        Role::Alice,
        MsgType::SiftSargPairs,
        Writer::new().bits(&valid).bits(&pairs).finish(),
    )?;

    let payload = ch.recv(Role::Bob, MsgType::SiftSargPairs)?;
    let (valid, pairs) = decode_pairs(&payload).map_err(|e| bad(MsgType::SiftSargPairs, e))?;
    let n_valid = valid.iter().filter(|&&v| v == 1).count();
    if valid.len() != detected.len() || pairs.len() != 2 * n_valid {
        return Err(bad(MsgType::SiftSargPairs, "pair count differs from detection count"));
    }
    let mut keep = Vec::with_capacity(n_valid);
    let mut bob_block = SiftedBlock::default();
    let mut pair_iter = pairs.chunks(2);
    for (&i, &v) in detected.iter().zip(&valid) {
        if v == 0 {
            outcomes[i].verdict = Verdict::NoDetection;
            continue;
        }
        let pair = pair_iter.next().expect("counted above");
        let s = &bob[i];
        let outcome = s.bit().expect("announced slots are single clicks");
        match sarg_decide(s.basis, outcome, pair[0], pair[1]) {
            Some(bit) => {
                keep.push(1);
                bob_block.bits.push(bit);
                bob_block.slot_map.push(s.slot);
                outcomes[i].verdict = Verdict::Kept;
            }
            None => {
                keep.push(0);
                outcomes[i].verdict = Verdict::Inconclusive;
            }
        }
    }
    ch.send(Role::Bob, MsgType::SiftKeep, payload::encode_bits(&keep))?;

    let keep = payload::decode_bits(&ch.recv(Role::Alice, MsgType::SiftKeep)?)
        .map_err(|r| bad(MsgType::SiftKeep, r))?;
    let mut alice_block = SiftedBlock::default();
    let mut flags = keep.iter();
    for a in announced.iter().filter(|a| a.bit.is_some()) {
        let k = *flags
            .next()
            .ok_or_else(|| bad(MsgType::SiftKeep, "too few keep flags"))?;
        if k == 1 {
            alice_block.bits.push(a.bit.expect("filtered"));
            alice_block.slot_map.push(a.slot);
        }
    }
    if flags.next().is_some() {
        return Err(bad(MsgType::SiftKeep, "too many keep flags"));
    }
    Ok(SiftResult {
        alice: alice_block,
        bob: bob_block,
        outcomes,
    })
}

/// Runs the chosen variant.
pub fn sift(
    variant: SiftVariant,
    alice: &[AliceSlot],
    bob: &[BobSlot],
    seed: u64,
    ch: &mut impl PublicChannel,
) -> Result<SiftResult, SiftError> {
    match variant {
        SiftVariant::Classic => classic_sift(alice, bob, ch),
        SiftVariant::Sarg => sarg_sift(alice, bob, seed, ch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::transport::Link;
    use crate::qchan::{simulate_weak_coherent, ChannelParams, DetectionRecord, FireMask};

    fn views(recs: &[DetectionRecord]) -> (Vec<AliceSlot>, Vec<BobSlot>) {
        (
            recs.iter().map(|r| r.alice_view()).collect(),
            recs.iter().map(|r| r.bob_view()).collect(),
        )
    }

    fn channel(mu: f64, vis: f64, dark: f64, seed: u64) -> ChannelParams {
        ChannelParams {
            mu,
            attenuation_db: 0.0,
            detector_qe: 0.5,
            dark_count_prob: dark,
            visibility_error: vis,
            pulse_rate_hz: 1e6,
            rng_seed: seed,
        }
    }

    fn run(p: &ChannelParams, n: usize) -> Vec<DetectionRecord> {
        let mut g = XorShift64Star::new(p.rng_seed ^ 0xABCD);
        let (bits, ab, bb) = (g.bits(n), g.bits(n), g.bits(n));
        simulate_weak_coherent(p, n, &bits, &ab, &bb).unwrap()
    }

    /// Per-slot classifier written from the verdict definitions alone.
    fn classify(r: &DetectionRecord) -> Verdict {
        match r.fire_mask.0 {
            0 => Verdict::NoDetection,
            3 => Verdict::MultipleDetection,
            _ if r.alice_basis != r.bob_basis => Verdict::WrongBasis,
            _ => Verdict::Kept,
        }
    }

    #[test]
    fn all_detected_matching_bases_keeps_everything() {
        let recs: Vec<DetectionRecord> = (0..64)
            .map(|i| DetectionRecord {
                slot: i,
                alice_basis: (i % 2) as u8,
                alice_bit: (i % 3 == 0) as u8,
                bob_basis: (i % 2) as u8,
                fire_mask: FireMask::single((i % 3 == 0) as u8 ^ (i == 10) as u8),
            })
            .collect();
        let (a, b) = views(&recs);
        let res = classic_sift(&a, &b, &mut Link::plain(1)).unwrap();
        assert_eq!(res.count(Verdict::Kept), 64);
        let diff: Vec<usize> = (0..64).filter(|&i| res.alice.bits[i] != res.bob.bits[i]).collect();
        assert_eq!(diff, vec![10]);
    }

    #[test]
    fn no_detections_gives_empty_blocks_after_one_message() {
        let recs = run(&channel(1e-9, 0.0, 0.0, 1), 100);
        let (a, b) = views(&recs);
        for variant in [SiftVariant::Classic, SiftVariant::Sarg] {
            let mut link = Link::plain(1);
            let res = sift(variant, &a, &b, 5, &mut link).unwrap();
            assert!(res.alice.is_empty() && res.bob.is_empty());
            assert_eq!(link.transcript().len(), 1);
        }
    }

    #[test]
    fn verdicts_match_per_slot_oracle() {
        let p = channel(0.8, 0.05, 0.05, 2);
        let mut g = XorShift64Star::new(3);
        for trial in 0..200 {
            let recs = run(&ChannelParams { rng_seed: trial, ..p.clone() }, 10);
            let _ = g.next_u64();
            let (a, b) = views(&recs);
            let res = classic_sift(&a, &b, &mut Link::plain(1)).unwrap();
            for (r, o) in recs.iter().zip(&res.outcomes) {
                assert_eq!(o.verdict, classify(r), "slot {}", r.slot);
            }
            assert_eq!(res.alice.slot_map, res.bob.slot_map);
        }
    }

    #[test]
    fn noiseless_classic_blocks_agree() {
        let recs = run(&channel(0.3, 0.0, 0.0, 4), 20_000);
        let (a, b) = views(&recs);
        let res = classic_sift(&a, &b, &mut Link::plain(1)).unwrap();
        assert!(res.alice.len() > 1000);
        assert_eq!(res.alice, res.bob);
        assert!(res.alice.slot_map.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn classic_transcript_does_not_depend_on_alice_bits() {
        let recs = run(&channel(0.5, 0.03, 0.01, 5), 5000);
        let (a, b) = views(&recs);
        let flipped: Vec<AliceSlot> = a
            .iter()
            .map(|s| AliceSlot { bit: s.bit.map(|v| v ^ 1), ..*s })
            .collect();
        let mut l1 = Link::plain(1);
        let mut l2 = Link::plain(1);
        classic_sift(&a, &b, &mut l1).unwrap();
        classic_sift(&flipped, &b, &mut l2).unwrap();
        assert_eq!(l1.transcript(), l2.transcript());
    }

    #[test]
    fn sarg_enumeration_oracle() {
        // Every (Alice state, decoy, Bob basis, Bob outcome) combination a
        // noiseless channel can produce, each equally likely.
        let mut kept = 0;
        let mut total = 0;
        for alice_basis in 0..2u8 {
            for alice_bit in 0..2u8 {
                for decoy in 0..2u8 {
                    for bob_basis in 0..2u8 {
                        for random_outcome in 0..2u8 {
                            let outcome = if bob_basis == alice_basis { alice_bit } else { random_outcome };
                            let (z, x) = if alice_basis == 0 { (alice_bit, decoy) } else { (decoy, alice_bit) };
                            total += 1;
                            // The state in Bob's basis is excluded iff its value differs from his outcome.
                            let excluded_same = if bob_basis == 0 { z != outcome } else { x != outcome };
                            let got = sarg_decide(bob_basis, outcome, z, x);
                            assert_eq!(got.is_some(), excluded_same);
                            if let Some(bit) = got {
                                kept += 1;
                                assert_eq!(bit, alice_bit);
                                assert_ne!(bob_basis, alice_basis);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!((kept, total), (8, 32));
    }

    #[test]
    fn sarg_yields_half_of_classic_noiselessly() {
        let recs = run(&channel(0.2, 0.0, 0.0, 6), 100_000);
        let (a, b) = views(&recs);
        let classic = classic_sift(&a, &b, &mut Link::plain(1)).unwrap();
        let sarg = sarg_sift(&a, &b, 77, &mut Link::plain(1)).unwrap();
        assert_eq!(sarg.alice, sarg.bob);
        let detected = classic.alice.len() + classic.count(Verdict::WrongBasis);
        let frac = sarg.alice.len() as f64 / detected as f64;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
        let ratio = sarg.alice.len() as f64 / classic.alice.len() as f64;
        assert!((ratio - 0.5).abs() < 0.03, "{ratio}");
    }

    #[test]
    fn sifting_is_reproducible() {
        let recs = run(&channel(0.5, 0.03, 0.01, 7), 3000);
        let (a, b) = views(&recs);
        let mut l1 = Link::plain(1);
        let mut l2 = Link::plain(1);
        let r1 = sarg_sift(&a, &b, 9, &mut l1).unwrap();
        let r2 = sarg_sift(&a, &b, 9, &mut l2).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(l1.transcript(), l2.transcript());
    }

    #[test]
    fn mismatched_ranges_are_rejected() {
        let recs = run(&channel(0.5, 0.0, 0.0, 8), 10);
        let (a, b) = views(&recs);
        assert_eq!(
            classic_sift(&a[1..], &b[..9], &mut Link::plain(1)),
            Err(SiftError::SlotRangeMismatch)
        );
    }

    #[test]
    fn entangled_slots_without_sender_value_are_dropped() {
        let b: Vec<BobSlot> = (0..4)
            .map(|i| BobSlot { slot: i, basis: 0, fire_mask: FireMask::single(1) })
            .collect();
        let a: Vec<AliceSlot> = (0..4)
            .map(|i| AliceSlot { slot: i, basis: 0, bit: (i % 2 == 0).then_some(1) })
            .collect();
        let res = classic_sift(&a, &b, &mut Link::plain(1)).unwrap();
        assert_eq!(res.alice.slot_map, vec![0, 2]);
        assert_eq!(res.bob.slot_map, vec![0, 2]);
        let res = sarg_sift(&a, &b, 1, &mut Link::plain(1)).unwrap();
        assert_eq!(res.alice.slot_map, res.bob.slot_map);
        assert_eq!(res.count(Verdict::NoDetection), 2);
    }
}
