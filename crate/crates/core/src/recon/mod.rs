//! Error reconciliation: Cascade (interactive) and Niagara (one-way LDPC).

pub mod cascade;
pub mod niagara;
pub mod shannon;

use std::fmt;
use std::str::FromStr;

use crate::bits::BitBlock;
use crate::net::transport::{PublicChannel, TransportError};

pub use cascade::{cascade_run, CascadeConfig};
pub use niagara::{build_code, choose_parity_count, niagara_decode, niagara_encode, niagara_run, CodeError, NiagaraCodeSpec, SparseParityMatrix};
pub use shannon::{h2, shannon_limit};

#[derive(Debug, thiserror::Error)]
pub enum ReconError {
    #[error("block lengths differ: alice {alice}, bob {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("error-rate estimate {0} outside [0, 0.5)")]
    InvalidErrorRate(f64),
    #[error("{0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Outcome of one reconciliation, as seen by the test harness: both sides'
/// corrected blocks are present so agreement can be checked directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconResult {
    pub alice: BitBlock,
    pub bob: BitBlock,
    pub disclosed_bits_d: usize,
    pub measured_error_count_e: usize,
    pub round_trips: usize,
    pub bytes_exchanged: usize,
    pub failed: bool,
}

impl ReconResult {
    /// Bob's corrected block.
    pub fn corrected(&self) -> &BitBlock {
        &self.bob
    }

    pub fn agree(&self) -> bool {
        self.alice.bits == self.bob.bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconProtocol {
    Cascade,
    Niagara,
}

impl FromStr for ReconProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cascade" => Ok(Self::Cascade),
            "niagara" => Ok(Self::Niagara),
            _ => Err(format!("unknown reconciliation protocol {s:?}")),
        }
    }
}

impl fmt::Display for ReconProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cascade => "cascade",
            Self::Niagara => "niagara",
        })
    }
}

/// Runs `protocol` with `seed` as the Cascade shuffle seed or Niagara code
/// seed.
pub fn reconcile(
    protocol: ReconProtocol,
    alice_bits: &[u8],
    bob_bits: &[u8],
    est_error_rate: f64,
    seed: u64,
    ch: &mut impl PublicChannel,
) -> Result<ReconResult, ReconError> {
    match protocol {
        ReconProtocol::Cascade => cascade_run(alice_bits, bob_bits, est_error_rate, &CascadeConfig::new(seed), ch),
        ReconProtocol::Niagara => niagara_run(alice_bits, bob_bits, est_error_rate, seed, ch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::transport::Link;
    use crate::rng::XorShift64Star;

    #[test]
    fn protocol_names() {
        for p in [ReconProtocol::Cascade, ReconProtocol::Niagara] {
            assert_eq!(p.to_string().parse::<ReconProtocol>().unwrap(), p);
        }
        assert!("ldpc".parse::<ReconProtocol>().is_err());
    }

    #[test]
    fn both_protocols_agree_on_the_same_block() {
        let mut g = XorShift64Star::new(4);
        let a = g.bits(4096);
        let mut b = a.clone();
        for &i in &g.permutation(4096)[..100] {
            b[i] ^= 1;
        }
        for p in [ReconProtocol::Cascade, ReconProtocol::Niagara] {
            let r = reconcile(p, &a, &b, 0.03, 1, &mut Link::plain(1)).unwrap();
            assert!(!r.failed, "{p}");
            assert!(r.agree());
            assert_eq!(r.measured_error_count_e, 100);
        }
    }
}
