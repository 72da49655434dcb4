//! The four entropy estimators side by side on one finite block.

use qkdnet::entropy::{usable_entropy, EntropyInputs, EstimatorKind};

fn main() {
    let inputs = EntropyInputs {
        b: 4096,
        e: 123,
        n: 8192,
        d: 1006,
        r: 0.0,
        c: 1e-6,
    };
    println!("b={} e={} n={} d={} c={:e}", inputs.b, inputs.e, inputs.n, inputs.d, inputs.c);
    for kind in EstimatorKind::ALL {
        let u = usable_entropy(kind, &inputs);
        let t = u.t.map_or_else(|| "undefined".to_string(), |t| format!("{t:.2}"));
        println!("  {:<16}t = {t:>10}   usable = {}", kind.name(), u.bits);
    }
}
