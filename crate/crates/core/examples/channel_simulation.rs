//! Sends a million pulses down each preset channel and compares the
//! simulated detection and error rates with the closed-form expectations.

use qkdnet::qchan::{expected_rates, ChannelParams, WeakCoherentLink, PRESET_NAMES};
use qkdnet::rng::XorShift64Star;

const PULSES: usize = 1_000_000;

fn main() {
    println!("{:<16}{:>12}{:>12}{:>12}{:>12}", "preset", "p_detect", "simulated", "qber", "simulated");
    for name in PRESET_NAMES {
        let params = ChannelParams::preset(name, 11).expect("built-in preset");
        let expected = expected_rates(&params);
        let mut g = XorShift64Star::new(3);
        let (bits, a_bases, b_bases) = (g.bits(PULSES), g.bits(PULSES), g.bits(PULSES));
        let recs = WeakCoherentLink::new(params)
            .expect("valid preset")
            .transmit(&bits, &a_bases, &b_bases)
            .expect("equal lengths");

        let detected = recs.iter().filter(|r| r.fire_mask.any()).count();
        let (mut sifted, mut errors) = (0usize, 0usize);
        for r in recs.iter().filter(|r| r.alice_basis == r.bob_basis) {
            if let Some(bit) = r.bob_bit() {
                sifted += 1;
                errors += usize::from(bit != r.alice_bit);
            }
        }
        println!(
            "{:<16}{:>12.6}{:>12.6}{:>12.4}{:>12.4}",
            name,
            expected.p_detect,
            detected as f64 / PULSES as f64,
            expected.expected_qber,
            errors as f64 / sifted.max(1) as f64
        );
    }
}
