//! Wegman-Carter tags: every message burns fresh key, a flipped bit is
//! rejected, and distilled key tops the ledger back up.

use qkdnet::auth::{AuthKeyLedger, TAG_KEY_BITS};
use qkdnet::privamp::{Lineage, SecretBlock};
use qkdnet::rng::XorShift64Star;

fn main() {
    let key = XorShift64Star::new(42).bits(4 * TAG_KEY_BITS);
    let mut sender = AuthKeyLedger::new(key.clone());
    let mut receiver = AuthKeyLedger::new(key);

    let msg = b"EC_CASCADE_PARITIES block 3".to_vec();
    let (tag, spent) = sender.make_tag(&msg).expect("key available");
    println!("tag {:016x} spent {spent} bits", tag.tag);
    println!("genuine message  {:?}", receiver.verify_tag(&msg, tag));

    let mut forged = msg.clone();
    forged[0] ^= 1;
    let (tag, _) = sender.make_tag(&msg).expect("key available");
    println!("flipped bit      {:?}", receiver.verify_tag(&forged, tag));
    println!("key left         {} bits", sender.available());

    let block = SecretBlock {
        bits: XorShift64Star::new(7).bits(1024),
        lineage: Lineage {
            session_id: 1,
            block_id: 0,
        },
    };
    sender.replenish(&block).expect("fresh block");
    receiver.replenish(&block).expect("fresh block");
    println!("after replenish  {} bits", sender.available());
    println!("reused block     {:?}", sender.replenish(&block));
    println!("ledger audit     {:?}", sender.audit());
}
