use qkdnet::entropy::EstimatorKind;
use qkdnet::net::relay::{relay_key, RelayError};
use qkdnet::net::{run_session, Network, NodeRole, PipelineConfig, SessionError, Topology, TopologyError};
use qkdnet::qchan::ChannelParams;

fn pools_agree(net: &Network, a: &str, b: &str) {
    let (x, y) = (net.peer(a, b).unwrap(), net.peer(b, a).unwrap());
    assert_eq!(x.pool.contents(), y.pool.contents(), "{a}-{b} pools");
    if let (Some(xa), Some(ya)) = (&x.auth, &y.auth) {
        assert_eq!(xa.outgoing, ya.incoming, "{a}->{b} ledgers");
        assert_eq!(xa.incoming, ya.outgoing, "{b}->{a} ledgers");
    }
}

fn config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        estimator: EstimatorKind::ShorPreskill,
        seed,
        ..PipelineConfig::default()
    }
}

#[test]
fn switch_reconfiguration_between_sessions() {
    let mut net = Network::new(Topology::cambridge());
    net.switch_set("anna", "bob").unwrap();
    net.preplace_auth("anna", "bob", 1 << 20, 1).unwrap();
    net.preplace_auth("anna", "boris", 1 << 20, 2).unwrap();

    let first = run_session(&mut net, "anna", "bob", &config(5), 3_000_000).unwrap();
    assert!(first.stats.blocks_reconciled > 0);
    let carry = net.peer("anna", "bob").unwrap().carry.clone();

    net.switch_set("anna", "boris").unwrap();
    let err = run_session(&mut net, "anna", "bob", &config(5), 1000).unwrap_err();
    assert!(matches!(err, SessionError::Topology(TopologyError::NoPath { .. })), "{err}");
    let far = run_session(&mut net, "anna", "boris", &config(5), 3_000_000).unwrap();
    assert_eq!(far.stats.secret_bits_out, 0);
    assert_eq!(net.peer("anna", "bob").unwrap().carry, carry);

    net.switch_set("anna", "bob").unwrap();
    let second = run_session(&mut net, "anna", "bob", &config(5), 3_000_000).unwrap();
    assert_eq!(second.session_id, first.session_id + 1);
    pools_agree(&net, "anna", "bob");
    pools_agree(&net, "anna", "boris");
}

#[test]
fn relay_carries_distilled_key_across_a_hub() {
    let lab = ChannelParams::preset("lab", 0).unwrap();
    let mut t = Topology::new();
    for (n, r) in [("west", NodeRole::Transmitter), ("east", NodeRole::Transmitter), ("hub", NodeRole::Receiver)] {
        t.add_node(n, r, lab.clone()).unwrap();
    }
    t.add_link("west", "hub", 0.0).unwrap();
    t.add_link("east", "hub", 0.0).unwrap();
    let mut net = Network::new(t);
    for (i, tx) in ["west", "east"].into_iter().enumerate() {
        net.preplace_auth(tx, "hub", 1 << 20, i as u64).unwrap();
        run_session(&mut net, tx, "hub", &config(9), 1_500_000).unwrap();
        pools_agree(&net, tx, "hub");
    }
    let before = net.pool("west", "hub").unwrap().available();
    assert!(before >= 512, "only {before} bits pooled");

    let out = relay_key(&mut net, &["west", "hub", "east"], 256).unwrap();
    assert_eq!(out.source_key, out.dest_key);
    assert_eq!(net.pool("west", "hub").unwrap().available(), before - 256);
    pools_agree(&net, "west", "hub");
    pools_agree(&net, "east", "hub");

    let err = relay_key(&mut net, &["west", "hub", "east"], 1 << 20).unwrap_err();
    assert!(matches!(err, RelayError::InsufficientKey { .. }));
}
