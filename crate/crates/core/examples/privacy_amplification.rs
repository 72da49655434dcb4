//! Hashes a reconciled 4096-bit block down to 1024 secret bits on both sides
//! and prints a golden-vector line for a small field.

use qkdnet::privamp::{gen_pa_params, gen_pa_params_for_block, golden_line, pa_hash, Lineage};
use qkdnet::rng::XorShift64Star;

fn main() {
    let mut g = XorShift64Star::new(8);
    let corrected = g.bits(4000);
    let params = gen_pa_params_for_block(corrected.len(), 1024, &mut g).expect("supported size");
    let lineage = Lineage {
        session_id: 1,
        block_id: 0,
    };
    let alice = pa_hash(&params, &corrected, lineage).expect("lengths match");
    let bob = pa_hash(&params, &corrected, lineage).expect("lengths match");
    println!("field size      {} (padded by {})", params.n, params.pad_len);
    println!("secret bits     {}", alice.len());
    println!("sides agree     {}", alice == bob);

    let mut small = gen_pa_params(64, 32, &mut g).expect("supported size");
    small.addend = vec![0; 32];
    let input = g.bits(64);
    let out = pa_hash(&small, &input, lineage).expect("lengths match");
    println!("golden vector   {}", golden_line(&small, &input, &out));
}
