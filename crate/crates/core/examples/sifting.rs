//! Classic BB84 and SARG04 sifting over the same noiseless detections.
//! SARG keeps about half as many bits.

use qkdnet::net::transport::{Link, PublicChannel};
use qkdnet::qchan::{ChannelParams, WeakCoherentLink};
use qkdnet::rng::XorShift64Star;
use qkdnet::sift::{sift, SiftVariant, Verdict};

fn main() {
    let params = ChannelParams::preset("lab", 5).expect("built-in preset");
    let n = 200_000;
    let mut g = XorShift64Star::new(9);
    let recs = WeakCoherentLink::new(params)
        .expect("valid preset")
        .transmit(&g.bits(n), &g.bits(n), &g.bits(n))
        .expect("equal lengths");
    let alice: Vec<_> = recs.iter().map(|r| r.alice_view()).collect();
    let bob: Vec<_> = recs.iter().map(|r| r.bob_view()).collect();

    for variant in [SiftVariant::Classic, SiftVariant::Sarg] {
        let mut link = Link::plain(1);
        let r = sift(variant, &alice, &bob, 17, &mut link).expect("matching records");
        let errors = r.alice.bits.iter().zip(&r.bob.bits).filter(|(a, b)| a != b).count();
        println!("{variant:?}");
        println!("  kept           {}", r.alice.len());
        println!("  wrong basis    {}", r.count(Verdict::WrongBasis));
        println!("  inconclusive   {}", r.count(Verdict::Inconclusive));
        println!("  multiple       {}", r.count(Verdict::MultipleDetection));
        println!("  errors         {errors}");
        println!("  bytes on wire  {}", link.bytes_sent());
    }
}
