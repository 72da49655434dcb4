//! Distills key on two lab links sharing a middle node, then relays a
//! 256-bit key end to end by one-time-pad hops through that node.

use qkdnet::entropy::EstimatorKind;
use qkdnet::net::relay::relay_key;
use qkdnet::net::{run_session, Network, NodeRole, PipelineConfig, Topology};
use qkdnet::qchan::ChannelParams;

fn main() {
    let lab = ChannelParams::preset("lab", 0).expect("built-in preset");
    let mut t = Topology::new();
    t.add_node("west", NodeRole::Transmitter, lab.clone()).expect("fresh name");
    t.add_node("east", NodeRole::Transmitter, lab.clone()).expect("fresh name");
    t.add_node("hub", NodeRole::Receiver, lab.clone()).expect("fresh name");
    t.add_link("west", "hub", 0.0).expect("roles match");
    t.add_link("east", "hub", 0.0).expect("roles match");

    let mut net = Network::new(t);
    let cfg = PipelineConfig {
        estimator: EstimatorKind::ShorPreskill,
        seed: 3,
        ..PipelineConfig::default()
    };
    for tx in ["west", "east"] {
        net.preplace_auth(tx, "hub", 1 << 20, 1).expect("known nodes");
        let s = run_session(&mut net, tx, "hub", &cfg, 1_500_000).expect("session completes");
        println!("{tx} -> hub  {} secret bits, {} to the pool", s.stats.secret_bits_out, s.stats.app_bits);
    }

    let out = relay_key(&mut net, &["west", "hub", "east"], 256).expect("enough key on both links");
    println!("relayed 256 bits, {} bytes on the wire, keys match: {}", out.bytes, out.source_key == out.dest_key);
    for (a, b) in [("west", "hub"), ("hub", "east")] {
        println!("  {a}-{b} pool left  {}", net.pool(a, b).map_or(0, |p| p.available()));
    }
}
