//! Builds the Niagara code for a 3% block, then decodes Bob's noisy copy
//! from Alice's syndrome alone.

use qkdnet::recon::niagara::DecodeFailure;
use qkdnet::recon::{build_code, choose_parity_count, niagara_decode, niagara_encode, NiagaraCodeSpec};
use qkdnet::rng::XorShift64Star;

fn main() {
    let (b, rate) = (4096, 0.03);
    let p = choose_parity_count(rate, b).expect("feasible rate");
    let code = build_code(&NiagaraCodeSpec::new(b, p, 2005)).expect("valid spec");
    println!("parities p         {p}");
    println!("mean column weight {:.2}", code.mean_column_weight());
    println!("4-cycles           {}", code.four_cycles());

    let mut g = XorShift64Star::new(4);
    let mut ok = 0;
    let trials = 20;
    for _ in 0..trials {
        let alice = g.bits(b);
        let mut bob = alice.clone();
        for &i in &g.permutation(b)[..123] {
            bob[i] ^= 1;
        }
        let syndrome = niagara_encode(&code, &alice).expect("sizes match");
        match niagara_decode(&code, &syndrome, &bob, rate, 20).expect("sizes match") {
            Ok(d) if d.bits == alice => ok += 1,
            Ok(d) => println!("  converged to a wrong codeword after {} iterations", d.iterations),
            Err(DecodeFailure { iterations }) => println!("  no convergence after {iterations} iterations"),
        }
    }
    println!("decoded            {ok}/{trials}");
}
