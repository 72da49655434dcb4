//! Runs the Anna-Bob and Alice-Boris links of the Cambridge network through
//! the full stack and prints the yield of each.

use qkdnet::entropy::EstimatorKind;
use qkdnet::net::{run_session, Network, PipelineConfig, Topology};

fn main() {
    let mut net = Network::new(Topology::cambridge());
    net.switch_set("anna", "bob").expect("both on the switch");
    for (tx, rx) in [("anna", "bob"), ("alice", "boris")] {
        net.preplace_auth(tx, rx, 1 << 20, 42).expect("known nodes");
        let cfg = PipelineConfig {
            seed: 2005,
            ..PipelineConfig::default()
        };
        let s = run_session(&mut net, tx, rx, &cfg, 10_000_000).expect("session completes");
        let st = &s.stats;
        println!("{tx} -> {rx}");
        println!("  simulated time     {:.3} s", st.wall_time);
        println!("  sifted rate        {:.0} bits/s", st.sifted_rate());
        println!("  measured QBER      {:.4}", st.qber_measured);
        println!("  blocks             {} reconciled, {} failed", st.blocks_reconciled, st.blocks_failed);
        println!("  disclosed          {} bits", st.disclosed_d);
        for (k, t) in EstimatorKind::ALL.iter().zip(st.t_estimates) {
            match t {
                Some(t) => println!("  mean t {:<14} {t:.1}", k.name()),
                None => println!("  mean t {:<14} undefined", k.name()),
            }
        }
        println!("  secret rate        {:.0} bits/s", st.secret_rate());
        println!("  auth key spent     {} bits", st.auth_bits_spent);
        println!("  net rate           {:.0} bits/s", st.net_rate());
    }
}
