//! The Cambridge optical switch: which transmitter reaches which receiver,
//! and at what loss, in each switch state.

use qkdnet::net::Topology;

fn main() {
    let mut t = Topology::cambridge();
    for (tx, rx) in [("anna", "bob"), ("anna", "boris")] {
        t.switch_set(tx, rx).expect("both on the switch");
        println!("coupled {tx} -> {rx}");
        for a in ["alice", "anna"] {
            for b in ["bob", "boris"] {
                match t.path_loss_db(a, b) {
                    Ok(db) => println!("  {a:>5} -> {b:<5} {db:5.1} dB"),
                    Err(_) => println!("  {a:>5} -> {b:<5}    no path"),
                }
            }
        }
    }
}
