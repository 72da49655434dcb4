//! Cascade on one 4096-bit block with 3% planted errors.

use qkdnet::net::transport::{Link, PublicChannel};
use qkdnet::recon::{cascade_run, shannon_limit, CascadeConfig};
use qkdnet::rng::XorShift64Star;

fn main() {
    let b = 4096;
    let mut g = XorShift64Star::new(1);
    let alice = g.bits(b);
    let mut bob = alice.clone();
    for &i in &g.permutation(b)[..123] {
        bob[i] ^= 1;
    }
    let mut link = Link::plain(1);
    let r = cascade_run(&alice, &bob, 0.03, &CascadeConfig::new(77), &mut link).expect("valid block");
    println!("blocks agree       {}", r.agree());
    println!("errors corrected   {}", r.measured_error_count_e);
    println!("parities disclosed {}", r.disclosed_bits_d);
    println!("shannon limit      {:.1}", shannon_limit(0.03, b));
    println!("round trips        {}", r.round_trips);
    println!("bytes              {}", r.bytes_exchanged);
    println!("frames             {}", link.frames_sent());
    println!("wire bytes         {}", link.bytes_sent());
}
