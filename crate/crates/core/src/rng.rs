//! Deterministic pseudo-random streams shared by every party.
//!
//! All randomness in the simulator comes from [`XorShift64Star`], a fixed
//! generator whose update equations are part of the wire contract: two
//! parties (or two independent implementations) seeded identically produce
//! bit-identical streams.
//!
//! ```text
//! seeding:  s0 = splitmix64(seed); if s0 == 0 { s0 = 0x9E37_79B9_7F4A_7C15 }
//! step:     x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
//! output:   x * 0x2545_F491_4F6C_DD1D          (wrapping)
//! f64:      (output >> 11) * 2^-53             in [0, 1)
//! bit:      output >> 63
//! below(n): (output as u128 * n as u128) >> 64
//! fork(t):  XorShift64Star::new(splitmix64(seed ^ t.wrapping_mul(0xD605_BBB5_8C8A_BBD3)))
//! ```

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of SplitMix64, used to spread seeds over the state space.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xorshift64* generator (Vigna, 2016).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    seed: u64,
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut state = splitmix64(seed);
        if state == 0 {
            state = SPLITMIX_GAMMA;
        }
        Self { seed, state }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `[0, n)` by multiply-shift. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.next_bit()).collect()
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        perm
    }

    /// Derives an independent stream labelled by `tag`.
    pub fn fork(&self, tag: u64) -> Self {
        Self::new(splitmix64(self.seed ^ tag.wrapping_mul(0xD605_BBB5_8C8A_BBD3)))
    }
}

/// Derives a sub-seed from a parent seed and a label, without building a stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    XorShift64Star::new(seed).fork(tag).seed()
}

/// FNV-1a over `data`, for turning names and config text into seed labels.
pub fn fnv1a64(data: &[u8]) -> u64 {
    data.iter()
        .fold(0xCBF2_9CE4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xAF63_DC4C_8601_EC8C);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_F739_67E8);
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of SplitMix64 starting at state 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(SPLITMIX_GAMMA), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = XorShift64Star::new(42);
        let mut b = XorShift64Star::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(XorShift64Star::new(1).next_u64(), XorShift64Star::new(2).next_u64());
    }

    #[test]
    fn step_follows_documented_equations() {
        let mut g = XorShift64Star::new(7);
        let mut x = splitmix64(7);
        for _ in 0..16 {
            x ^= x >> 12;
            x ^= x << 25;
            x ^= x >> 27;
            assert_eq!(g.next_u64(), x.wrapping_mul(0x2545_F491_4F6C_DD1D));
        }
    }

    #[test]
    fn uniform_mean_and_bit_balance() {
        let mut g = XorShift64Star::new(3);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| g.next_f64()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
        let ones: usize = (0..n).map(|_| g.next_bit() as usize).sum();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn permutation_is_a_bijection() {
        let mut g = XorShift64Star::new(9);
        let mut p = g.permutation(1000);
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(i, &v)| i == v));
    }

    #[test]
    fn forks_differ_from_parent_and_each_other() {
        let g = XorShift64Star::new(11);
        let mut a = g.fork(1);
        let mut b = g.fork(2);
        let mut parent = g.clone();
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, parent.next_u64());
        assert_eq!(g.fork(1).next_u64(), x);
    }
}
