//! Hop-by-hop one-time-pad key relay.
//!
//! A minimal stand-in for key transport between nodes with no direct QKD
//! link. The key is the next `length` bits of the pool the first two nodes
//! share. From there each node sends the key XOR the pad it shares with its
//! successor (KEYRELAY_XOR), and the successor strips that pad with its own
//! copy. Pads are destroyed as they are used. Routing is not attempted: the
//! caller names the path.

use thiserror::Error;

use super::frame::MsgType;
use super::node::Network;
use super::payload::{Reader, Writer};
use super::pool::PoolError;
use super::transport::{Link, PublicChannel, Role, TransportError};
use crate::bits;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelayError {
    #[error("a relay path needs at least two distinct nodes")]
    BadPath,
    #[error("insufficient key between `{a}` and `{b}`: {source}")]
    InsufficientKey { a: String, b: String, source: PoolError },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayOutcome {
    pub source_key: Vec<u8>,
    pub dest_key: Vec<u8>,
    /// Bytes sent over all hops.
    pub bytes: usize,
}

fn encode(masked: &[u8]) -> Vec<u8> {
    Writer::new().u32(masked.len() as u32).bits(masked).finish()
}

fn decode(payload: &[u8], length: usize) -> Result<Vec<u8>, TransportError> {
    let bad = |r| TransportError::payload(MsgType::KeyRelayXor, r);
    let mut r = Reader::new(payload);
    let declared = r.u32().map_err(bad)? as usize;
    let masked = r.bits().map_err(bad)?;
    r.finish().map_err(bad)?;
    if declared != length || masked.len() != length {
        return Err(bad("relayed key has the wrong length"));
    }
    Ok(masked)
}

/// Delivers a `length`-bit key from `path[0]` to its last node.
///
/// Every link on the path must hold `length` pooled bits on both ends, or
/// nothing is consumed.
pub fn relay_key(net: &mut Network, path: &[&str], length: usize) -> Result<RelayOutcome, RelayError> {
    if path.len() < 2 || path.windows(2).any(|w| w[0] == w[1]) {
        return Err(RelayError::BadPath);
    }
    for w in path.windows(2) {
        for (a, b) in [(w[0], w[1]), (w[1], w[0])] {
            let available = net.pool(a, b).map_or(0, |p| p.available());
            if available < length {
                return Err(RelayError::InsufficientKey {
                    a: a.to_string(),
                    b: b.to_string(),
                    source: PoolError::InsufficientKey {
                        needed: length,
                        available,
                    },
                });
            }
        }
    }

    // Each link's pad, as seen from both ends.
    let mut pads = Vec::with_capacity(path.len() - 1);
    for w in path.windows(2) {
        let near = net.peer_mut(w[0], w[1]).pool.take(length).expect("checked above");
        let far = net.peer_mut(w[1], w[0]).pool.take(length).expect("checked above");
        pads.push((near, far));
    }
    if path.len() == 2 {
        let (near, far) = pads.pop().expect("one link");
        return Ok(RelayOutcome {
            source_key: near,
            dest_key: far,
            bytes: 0,
        });
    }

    // The node after the source holds the key as its copy of the first pad.
    let source_key = pads[0].0.clone();
    let mut carried = pads[0].1.clone();
    let mut bytes = 0;
    for (hop, (near, far)) in pads.iter().enumerate().skip(1) {
        let mut link = Link::plain(hop as u32);
        link.send(Role::Alice, MsgType::KeyRelayXor, encode(&bits::xor(&carried, near)))?;
        let masked = decode(&link.recv(Role::Bob, MsgType::KeyRelayXor)?, length)?;
        bytes += link.bytes_sent();
        carried = bits::xor(&masked, far);
    }
    let dest_key = carried;
    Ok(RelayOutcome {
        source_key,
        dest_key,
        bytes,
    })
}
