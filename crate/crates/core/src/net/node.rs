//! Per-node state: for every peer a node talks to, its key pool, its
//! authentication ledgers and the sifted bits waiting to fill a block.

use std::collections::BTreeMap;

use super::pool::KeyPool;
use super::topology::{Topology, TopologyError};
use super::transport::{mutual_auth, PartyAuth};
use crate::rng::{derive_seed, XorShift64Star};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeerState {
    pub pool: KeyPool,
    /// `None` runs the link unauthenticated (lab mode, insecure).
    pub auth: Option<PartyAuth>,
    /// Sifted bits held over for the next block.
    pub carry: Vec<u8>,
    /// Smoothed error rate used to size reconciliation.
    pub qber_estimate: Option<f64>,
    pub sessions: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: Topology,
    peers: BTreeMap<(String, String), PeerState>,
}

impl Network {
    pub fn new(topology: Topology) -> Self {
        Self {
            topology,
            peers: BTreeMap::new(),
        }
    }

    /// What `node` holds about its link with `peer`.
    pub fn peer(&self, node: &str, peer: &str) -> Option<&PeerState> {
        self.peers.get(&(node.to_string(), peer.to_string()))
    }

    pub fn peer_mut(&mut self, node: &str, peer: &str) -> &mut PeerState {
        self.peers
            .entry((node.to_string(), peer.to_string()))
            .or_default()
    }

    pub fn pool(&self, node: &str, peer: &str) -> Option<&KeyPool> {
        self.peer(node, peer).map(|p| &p.pool)
    }

    /// Installs pre-placed authentication keys of `bits` bits per direction
    /// between `a` and `b`, drawn from `key_seed`.
    pub fn preplace_auth(&mut self, a: &str, b: &str, bits: usize, key_seed: u64) -> Result<(), TopologyError> {
        self.topology.node(a)?;
        self.topology.node(b)?;
        let ab = XorShift64Star::new(derive_seed(key_seed, 1)).bits(bits);
        let ba = XorShift64Star::new(derive_seed(key_seed, 2)).bits(bits);
        let (pa, pb) = mutual_auth(ab, ba);
        self.peer_mut(a, b).auth = Some(pa);
        self.peer_mut(b, a).auth = Some(pb);
        Ok(())
    }

    pub fn switch_set(&mut self, tx: &str, rx: &str) -> Result<(), TopologyError> {
        self.topology.switch_set(tx, rx)
    }
}
