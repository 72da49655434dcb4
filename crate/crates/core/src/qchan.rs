//! Statistical models of the quantum channel.
//!
//! Both the weak-coherent (phase-encoded) and the entangled-pair systems are
//! reduced to an abstract `(basis, value)` channel. A pulse carries a
//! Poisson(`mu`) number of photons; each photon survives the fiber with
//! probability `T = 10^(-attenuation_db / 10)` and is registered by a detector
//! with probability `detector_qe`. By Poisson thinning the number of photons
//! registered at each of Bob's two detectors is itself Poisson, so a detector
//! fires with probability
//!
//! ```text
//! P(fire) = 1 - (1 - dark_count_prob) * exp(-lambda_detector)
//! ```
//!
//! where, with `lambda = mu * T * detector_qe`, a matched basis sends
//! `lambda * (1 - visibility_error)` to the detector of Alice's value and
//! `lambda * visibility_error` to the other one, and a mismatched basis splits
//! `lambda / 2` evenly. The two detectors are independent, which is what lets
//! the simulator draw one uniform per detector per slot.

use thiserror::Error;

use crate::ini::{Ini, IniError};
use crate::rng::XorShift64Star;

const PRESETS: &str = include_str!("../presets/channels.ini");

/// Names of the built-in channel presets.
pub const PRESET_NAMES: [&str; 4] = ["anna-bob", "boris-bob", "lab", "nist-freespace"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("input length mismatch: expected {expected} slots, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid channel parameter: {0}")]
    InvalidParams(String),
    #[error("unknown channel preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Ini(#[from] IniError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub mu: f64,
    pub attenuation_db: f64,
    pub detector_qe: f64,
    pub dark_count_prob: f64,
    pub visibility_error: f64,
    pub pulse_rate_hz: f64,
    pub rng_seed: u64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidParams(m.to_string()));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.attenuation_db >= 0.0 && self.attenuation_db.is_finite()) {
            return bad("attenuation_db must be non-negative");
        }
        if !(self.detector_qe > 0.0 && self.detector_qe <= 1.0) {
            return bad("detector_qe must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dark_count_prob) {
            return bad("dark_count_prob must lie in [0, 1)");
        }
        if !(0.0..0.5).contains(&self.visibility_error) {
            return bad("visibility_error must lie in [0, 0.5)");
        }
        if !(self.pulse_rate_hz > 0.0 && self.pulse_rate_hz.is_finite()) {
            return bad("pulse_rate_hz must be positive");
        }
        Ok(())
    }

    /// Fiber transmittance `10^(-dB/10)`.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db / 10.0)
    }

    /// Mean number of registered signal photons per pulse.
    pub fn signal_mean(&self) -> f64 {
        self.mu * self.transmittance() * self.detector_qe
    }

    /// Loads a built-in preset by name.
    pub fn preset(name: &str, rng_seed: u64) -> Result<Self, ChannelError> {
        let ini = Ini::parse(PRESETS)?;
        let section = ini
            .section(name)
            .ok_or_else(|| ChannelError::UnknownPreset(name.to_string()))?;
        let params = Self::from_section(section, rng_seed)?;
        Ok(params)
    }

    pub(crate) fn from_section(
        section: &crate::ini::Section,
        rng_seed: u64,
    ) -> Result<Self, ChannelError> {
        section.check_keys(&[
            "mu",
            "attenuation_db",
            "detector_qe",
            "dark_count_prob",
            "visibility_error",
            "pulse_rate_hz",
        ])?;
        let params = Self {
            mu: section.require("mu")?,
            attenuation_db: section.require("attenuation_db")?,
            detector_qe: section.require("detector_qe")?,
            dark_count_prob: section.require("dark_count_prob")?,
            visibility_error: section.require("visibility_error")?,
            pulse_rate_hz: section.require("pulse_rate_hz")?,
            rng_seed,
        };
        params.validate()?;
        Ok(params)
    }

    /// Detector fire probabilities `[matched correct, matched wrong, mismatched]`.
    fn fire_probs(&self) -> [f64; 3] {
        let lambda = self.signal_mean();
        let v = self.visibility_error;
        let keep = 1.0 - self.dark_count_prob;
        [
            1.0 - keep * (-lambda * (1.0 - v)).exp(),
            1.0 - keep * (-lambda * v).exp(),
            1.0 - keep * (-lambda / 2.0).exp(),
        ]
    }
}

/// Both detectors of the measured basis, as a 2-bit mask (bit `v` = detector for value `v`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FireMask(pub u8);

impl FireMask {
    pub const NONE: FireMask = FireMask(0b00);
    pub const MULTIPLE: FireMask = FireMask(0b11);

    pub fn single(value: u8) -> Self {
        FireMask(1 << (value & 1))
    }

    /// The detected value, defined iff exactly one detector fired.
    pub fn value(self) -> Option<u8> {
        match self.0 & 0b11 {
            0b01 => Some(0),
            0b10 => Some(1),
            _ => None,
        }
    }

    pub fn any(self) -> bool {
        self.0 & 0b11 != 0
    }

    pub fn is_multiple(self) -> bool {
        self.0 & 0b11 == 0b11
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionRecord {
    pub slot: u64,
    pub alice_basis: u8,
    pub alice_bit: u8,
    pub bob_basis: u8,
    pub fire_mask: FireMask,
}

impl DetectionRecord {
    pub fn bob_bit(&self) -> Option<u8> {
        self.fire_mask.value()
    }

    /// What the transmitter knows about this slot.
    pub fn alice_view(&self) -> AliceSlot {
        AliceSlot {
            slot: self.slot,
            basis: self.alice_basis,
            bit: Some(self.alice_bit),
        }
    }

    /// What the receiver knows about this slot.
    pub fn bob_view(&self) -> BobSlot {
        BobSlot {
            slot: self.slot,
            basis: self.bob_basis,
            fire_mask: self.fire_mask,
        }
    }
}

/// Transmitter-side slot. `bit` is `None` when the transmitter has no value
/// for the slot (an entangled-pair sender whose own detector stayed silent).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliceSlot {
    pub slot: u64,
    pub basis: u8,
    pub bit: Option<u8>,
}

/// Receiver-side slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BobSlot {
    pub slot: u64,
    pub basis: u8,
    pub fire_mask: FireMask,
}

impl BobSlot {
    pub fn bit(&self) -> Option<u8> {
        self.fire_mask.value()
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), ChannelError> {
    if expected != got {
        return Err(ChannelError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// A weak-coherent source and receiver pair advancing slot by slot.
///
/// Successive calls to [`WeakCoherentLink::transmit`] continue the same slot
/// numbering and random stream, so a long run can be simulated in chunks with
/// the same result as one call.
#[derive(Debug, Clone)]
pub struct WeakCoherentLink {
    params: ChannelParams,
    probs: [f64; 3],
    rng: XorShift64Star,
    next_slot: u64,
}

impl WeakCoherentLink {
    pub fn new(params: ChannelParams) -> Result<Self, ChannelError> {
        params.validate()?;
        Ok(Self {
            probs: params.fire_probs(),
            rng: XorShift64Star::new(params.rng_seed),
            params,
            next_slot: 0,
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn next_slot(&self) -> u64 {
        self.next_slot
    }

    pub fn transmit(
        &mut self,
        alice_bits: &[u8],
        alice_bases: &[u8],
        bob_bases: &[u8],
    ) -> Result<Vec<DetectionRecord>, ChannelError> {
        let n = alice_bits.len();
        check_len(n, alice_bases.len())?;
        check_len(n, bob_bases.len())?;
        let [matched_right, matched_wrong, mismatched] = self.probs;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (a_bit, a_basis, b_basis) = (alice_bits[i] & 1, alice_bases[i] & 1, bob_bases[i] & 1);
            // Per-detector fire probabilities indexed by detector value.
            let p = if a_basis == b_basis {
                if a_bit == 0 {
                    [matched_right, matched_wrong]
                } else {
                    [matched_wrong, matched_right]
                }
            } else {
                [mismatched, mismatched]
            };
            let fire0 = self.rng.next_f64() < p[0];
            let fire1 = self.rng.next_f64() < p[1];
            out.push(DetectionRecord {
                slot: self.next_slot,
                alice_basis: a_basis,
                alice_bit: a_bit,
                bob_basis: b_basis,
                fire_mask: FireMask(fire0 as u8 | (fire1 as u8) << 1),
            });
            self.next_slot += 1;
        }
        Ok(out)
    }
}

/// Simulates `n_slots` pulses of the weak-coherent channel from `params.rng_seed`.
pub fn simulate_weak_coherent(
    params: &ChannelParams,
    n_slots: usize,
    alice_bits: &[u8],
    alice_bases: &[u8],
    bob_bases: &[u8],
) -> Result<Vec<DetectionRecord>, ChannelError> {
    check_len(n_slots, alice_bits.len())?;
    WeakCoherentLink::new(params.clone())?.transmit(alice_bits, alice_bases, bob_bases)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangledParams {
    /// Mean pairs per gate; the per-slot pair probability is `min(pair_rate, 1)`.
    pub pair_rate: f64,
    /// Probability that the local (Alex) photon is registered.
    pub local_det_prob: f64,
    /// Fiber and detector parameters for the remote (Barb) photon. Its
    /// `dark_count_prob` applies to the detectors on both sides, which are
    /// identical suites; `mu` and `pulse_rate_hz` are unused.
    pub remote_path: ChannelParams,
}

impl EntangledParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return Err(ChannelError::InvalidParams("pair_rate must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.local_det_prob) {
            return Err(ChannelError::InvalidParams("local_det_prob must lie in [0, 1]".into()));
        }
        self.remote_path.validate()
    }

    pub fn pair_prob(&self) -> f64 {
        self.pair_rate.min(1.0)
    }

    /// Probability that the remote photon of a pair is registered.
    pub fn remote_det_prob(&self) -> f64 {
        self.remote_path.transmittance() * self.remote_path.detector_qe
    }

    /// Expected coincidence probability per slot without dark counts.
    pub fn coincidence_prob(&self) -> f64 {
        self.pair_prob() * self.local_det_prob * self.remote_det_prob()
    }
}

/// Simulates an entangled-pair source located at Alex.
///
/// Returns one record list per side. In both lists `alice_basis` is Alex's
/// basis and `alice_bit` is the value fixed at pair generation (0 for slots
/// with no pair); `bob_basis`/`fire_mask` describe that side's own
/// measurement.
pub fn simulate_entangled(
    params: &EntangledParams,
    n_slots: usize,
    alex_bases: &[u8],
    barb_bases: &[u8],
) -> Result<(Vec<DetectionRecord>, Vec<DetectionRecord>), ChannelError> {
    params.validate()?;
    check_len(n_slots, alex_bases.len())?;
    check_len(n_slots, barb_bases.len())?;
    let mut rng = XorShift64Star::new(params.remote_path.rng_seed);
    let pair_p = params.pair_prob();
    let remote_p = params.remote_det_prob();
    let dark = params.remote_path.dark_count_prob;
    let vis = params.remote_path.visibility_error;
    let mut alex = Vec::with_capacity(n_slots);
    let mut barb = Vec::with_capacity(n_slots);
    for slot in 0..n_slots {
        let (a_basis, b_basis) = (alex_bases[slot] & 1, barb_bases[slot] & 1);
        let mut a_mask = 0u8;
        let mut b_mask = 0u8;
        let mut value = 0u8;
        if rng.next_f64() < pair_p {
            value = rng.next_bit();
            if rng.next_f64() < params.local_det_prob {
                a_mask |= 1 << value;
            }
            if rng.next_f64() < remote_p {
                let outcome = if a_basis == b_basis {
                    value ^ rng.bernoulli(vis) as u8
                } else {
                    rng.next_bit()
                };
                b_mask |= 1 << outcome;
            }
        }
        for det in 0..2 {
            if rng.next_f64() < dark {
                a_mask |= 1 << det;
            }
            if rng.next_f64() < dark {
                b_mask |= 1 << det;
            }
        }
        alex.push(DetectionRecord {
            slot: slot as u64,
            alice_basis: a_basis,
            alice_bit: value,
            bob_basis: a_basis,
            fire_mask: FireMask(a_mask),
        });
        barb.push(DetectionRecord {
            slot: slot as u64,
            alice_basis: a_basis,
            alice_bit: value,
            bob_basis: b_basis,
            fire_mask: FireMask(b_mask),
        });
    }
    Ok((alex, barb))
}

/// Turns entangled records into BB84 sifting inputs: Alex plays the
/// transmitter and only holds a value where exactly one of his detectors fired.
pub fn coincidence_views(
    alex: &[DetectionRecord],
    barb: &[DetectionRecord],
) -> (Vec<AliceSlot>, Vec<BobSlot>) {
    let alice = alex
        .iter()
        .map(|r| AliceSlot {
            slot: r.slot,
            basis: r.bob_basis,
            bit: r.bob_bit(),
        })
        .collect();
    let bob = barb.iter().map(DetectionRecord::bob_view).collect();
    (alice, bob)
}

/// Closed-form link expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    /// Probability that at least one detector fires (basis independent).
    pub p_detect: f64,
    /// Probability of exactly one fire given matched bases.
    pub p_single_matched: f64,
    pub sifted_rate_hz: f64,
    pub expected_qber: f64,
}

pub fn expected_rates(params: &ChannelParams) -> ExpectedRates {
    let [pc, pw, _] = params.fire_probs();
    let right = pc * (1.0 - pw);
    let wrong = pw * (1.0 - pc);
    let single = right + wrong;
    let keep = 1.0 - params.dark_count_prob;
    ExpectedRates {
        p_detect: 1.0 - keep * keep * (-params.signal_mean()).exp(),
        p_single_matched: single,
        sifted_rate_hz: params.pulse_rate_hz * 0.5 * single,
        expected_qber: if single > 0.0 { wrong / single } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, db: f64, qe: f64, dark: f64, vis: f64) -> ChannelParams {
        ChannelParams {
            mu,
            attenuation_db: db,
            detector_qe: qe,
            dark_count_prob: dark,
            visibility_error: vis,
            pulse_rate_hz: 3.3e6,
            rng_seed: 17,
        }
    }

    fn inputs(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let mut g = XorShift64Star::new(seed);
        (g.bits(n), g.bits(n), g.bits(n))
    }

    fn within_3_sigma(count: usize, n: usize, p: f64) -> bool {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - mean).abs() <= 3.0 * sd
    }

    #[test]
    fn rejects_invalid_params_and_lengths() {
        assert!(params(0.0, 1.0, 0.1, 0.0, 0.0).validate().is_err());
        assert!(params(0.5, -1.0, 0.1, 0.0, 0.0).validate().is_err());
        assert!(params(0.5, 1.0, 0.0, 0.0, 0.0).validate().is_err());
        assert!(params(0.5, 1.0, 0.1, 1.0, 0.0).validate().is_err());
        assert!(params(0.5, 1.0, 0.1, 0.0, 0.5).validate().is_err());
        let p = params(0.5, 1.0, 0.1, 0.0, 0.0);
        let err = simulate_weak_coherent(&p, 3, &[0, 1, 0], &[0, 1], &[0, 0, 0]).unwrap_err();
        assert_eq!(err, ChannelError::LengthMismatch { expected: 3, got: 2 });
        assert!(simulate_weak_coherent(&p, 4, &[0, 1, 0], &[0; 3], &[0; 3]).is_err());
    }

    #[test]
    fn single_fire_probability_matches_poisson_thinning() {
        let p = params(0.5, 5.1, 0.15, 0.0, 0.0);
        // Frozen from a 60-digit evaluation of 1 - exp(-0.5 * 10^-0.51 * 0.15).
        let closed = 0.022_910_687_179_960_54;
        assert!((1.0 - (-p.signal_mean()).exp() - closed).abs() < 1e-15);
        let n = 1_000_000;
        let (bits, ab, bb) = inputs(n, 5);
        let recs = simulate_weak_coherent(&p, n, &bits, &ab, &bb).unwrap();
        let fired = recs.iter().filter(|r| r.fire_mask.any()).count();
        assert!(within_3_sigma(fired, n, closed), "fired {fired}");
    }

    #[test]
    fn saturated_source_always_fires() {
        let p = params(1e3, 0.0, 1.0, 0.0, 0.0);
        let (bits, ab, bb) = inputs(10_000, 6);
        let recs = simulate_weak_coherent(&p, 10_000, &bits, &ab, &bb).unwrap();
        assert!(recs.iter().all(|r| r.fire_mask.any()));
        assert!(recs
            .iter()
            .filter(|r| r.alice_basis == r.bob_basis)
            .all(|r| r.bob_bit() == Some(r.alice_bit)));
    }

    #[test]
    fn dark_counts_alone_are_independent_coins() {
        let p = params(1e-12, 0.0, 1.0, 0.5, 0.0);
        let n = 200_000;
        let (bits, ab, bb) = inputs(n, 8);
        let recs = simulate_weak_coherent(&p, n, &bits, &ab, &bb).unwrap();
        let multiple = recs.iter().filter(|r| r.fire_mask.is_multiple()).count();
        let none = recs.iter().filter(|r| !r.fire_mask.any()).count();
        assert!(within_3_sigma(multiple, n, 0.25));
        assert!(within_3_sigma(none, n, 0.25));
    }

    #[test]
    fn bob_bit_defined_iff_single_fire() {
        let p = params(2.0, 0.0, 0.9, 0.3, 0.1);
        let (bits, ab, bb) = inputs(5000, 9);
        for r in simulate_weak_coherent(&p, 5000, &bits, &ab, &bb).unwrap() {
            let single = r.fire_mask.0 == 0b01 || r.fire_mask.0 == 0b10;
            assert_eq!(r.bob_bit().is_some(), single);
        }
    }

    #[test]
    fn chunked_transmission_equals_one_shot() {
        let p = params(0.5, 3.0, 0.2, 1e-3, 0.02);
        let (bits, ab, bb) = inputs(1000, 10);
        let whole = simulate_weak_coherent(&p, 1000, &bits, &ab, &bb).unwrap();
        let mut link = WeakCoherentLink::new(p).unwrap();
        let mut parts = link.transmit(&bits[..400], &ab[..400], &bb[..400]).unwrap();
        parts.extend(link.transmit(&bits[400..], &ab[400..], &bb[400..]).unwrap());
        assert_eq!(whole, parts);
    }

    #[test]
    fn expected_qber_single_source() {
        // Without darks only double clicks pull the rate below the optical error.
        let r = expected_rates(&params(0.5, 5.1, 0.15, 0.0, 0.03));
        assert!((r.expected_qber - 0.029_684_017_014_032_89).abs() < 1e-12);
    }

    #[test]
    fn anna_bob_preset_is_calibrated_to_three_percent() {
        let p = ChannelParams::preset("anna-bob", 1).unwrap();
        assert_eq!((p.mu, p.attenuation_db, p.detector_qe), (0.5, 5.1, 0.15));
        assert_eq!(p.pulse_rate_hz, 3.3e6);
        let r = expected_rates(&p);
        assert!((r.expected_qber - 0.03).abs() < 1e-6, "{}", r.expected_qber);
        for name in PRESET_NAMES {
            ChannelParams::preset(name, 0).unwrap();
        }
        assert!(matches!(
            ChannelParams::preset("nope", 0),
            Err(ChannelError::UnknownPreset(_))
        ));
    }

    #[test]
    fn empirical_rates_match_closed_form() {
        for (i, p) in [
            params(0.5, 5.1, 0.15, 1e-3, 0.025),
            params(0.2, 2.0, 0.5, 0.01, 0.05),
            ChannelParams::preset("boris-bob", 3).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let n = 600_000;
            let (bits, ab, bb) = inputs(n, 20 + i as u64);
            let recs = simulate_weak_coherent(&p, n, &bits, &ab, &bb).unwrap();
            let r = expected_rates(&p);
            let detected = recs.iter().filter(|r| r.fire_mask.any()).count();
            assert!(within_3_sigma(detected, n, r.p_detect));
            let matched: Vec<_> = recs.iter().filter(|r| r.alice_basis == r.bob_basis).collect();
            let singles: Vec<_> = matched.iter().filter(|r| r.bob_bit().is_some()).collect();
            assert!(within_3_sigma(singles.len(), matched.len(), r.p_single_matched));
            let errors = singles.iter().filter(|r| r.bob_bit() != Some(r.alice_bit)).count();
            assert!(within_3_sigma(errors, singles.len(), r.expected_qber));
        }
    }

    #[test]
    fn monotone_in_loss_and_darks() {
        let base = params(0.5, 5.0, 0.15, 1e-4, 0.02);
        let mut prev = f64::INFINITY;
        for db in [0.0, 1.0, 5.0, 10.0, 20.0] {
            let rate = expected_rates(&ChannelParams { attenuation_db: db, ..base.clone() }).sifted_rate_hz;
            assert!(rate < prev);
            prev = rate;
        }
        let mut prev = 0.0;
        for dark in [0.0, 1e-5, 1e-4, 1e-3, 1e-2] {
            let q = expected_rates(&ChannelParams { dark_count_prob: dark, ..base.clone() }).expected_qber;
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn detection_is_basis_independent() {
        let p = params(0.8, 1.0, 0.5, 0.01, 0.05);
        let n = 400_000;
        let mut g = XorShift64Star::new(31);
        let bits = g.bits(n);
        let same = vec![0u8; n];
        let flipped = vec![1u8; n];
        let matched = simulate_weak_coherent(&p, n, &bits, &same, &same).unwrap();
        let crossed = simulate_weak_coherent(&p, n, &bits, &same, &flipped).unwrap();
        let pd = expected_rates(&p).p_detect;
        let count = |v: &[DetectionRecord]| v.iter().filter(|r| r.fire_mask.any()).count();
        assert!(within_3_sigma(count(&matched), n, pd));
        assert!(within_3_sigma(count(&crossed), n, pd));
    }

    #[test]
    fn deterministic_under_seed() {
        let p = params(0.5, 5.1, 0.15, 1e-3, 0.025);
        let (bits, ab, bb) = inputs(2000, 4);
        let a = simulate_weak_coherent(&p, 2000, &bits, &ab, &bb).unwrap();
        let b = simulate_weak_coherent(&p, 2000, &bits, &ab, &bb).unwrap();
        assert_eq!(a, b);
    }

    fn entangled(pair_rate: f64, local: f64, remote_qe: f64, db: f64, dark: f64) -> EntangledParams {
        EntangledParams {
            pair_rate,
            local_det_prob: local,
            remote_path: params(1.0, db, remote_qe, dark, 0.0),
        }
    }

    #[test]
    fn ideal_pairs_always_coincide() {
        let e = entangled(1.0, 1.0, 1.0, 0.0, 0.0);
        let n = 5000;
        let mut g = XorShift64Star::new(2);
        let (xa, xb) = (g.bits(n), g.bits(n));
        let (alex, barb) = simulate_entangled(&e, n, &xa, &xb).unwrap();
        for (a, b) in alex.iter().zip(&barb) {
            assert!(a.bob_bit().is_some() && b.bob_bit().is_some());
            if a.bob_basis == b.bob_basis {
                assert_eq!(a.bob_bit(), b.bob_bit());
            }
        }
    }

    #[test]
    fn coincidences_follow_the_square_law() {
        // Remote total detection probability 0.15: lossless fiber, QE 0.15.
        let e = entangled(0.5, 0.15, 0.15, 0.0, 0.0);
        let n = 2_000_000;
        let mut g = XorShift64Star::new(12);
        let (xa, xb) = (g.bits(n), g.bits(n));
        let (alex, barb) = simulate_entangled(&e, n, &xa, &xb).unwrap();
        let coincidences = alex
            .iter()
            .zip(&barb)
            .filter(|(a, b)| a.fire_mask.any() && b.fire_mask.any())
            .count();
        assert!((e.coincidence_prob() - 0.5 * 0.0225).abs() < 1e-15);
        assert!(within_3_sigma(coincidences, n, e.coincidence_prob()));
        assert!(e.coincidence_prob() <= e.local_det_prob.min(e.remote_det_prob()));
    }

    #[test]
    fn no_pairs_no_clicks() {
        let e = entangled(0.0, 0.5, 0.5, 0.0, 0.0);
        let (alex, barb) = simulate_entangled(&e, 1000, &[0; 1000], &[1; 1000]).unwrap();
        assert!(alex.iter().chain(&barb).all(|r| !r.fire_mask.any()));
        assert!(simulate_entangled(&e, 10, &[0; 9], &[0; 10]).is_err());
    }
}
