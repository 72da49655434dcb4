//! Arithmetic in GF(2^n) for large `n`, defined by a sparse polynomial.
//!
//! Elements are little-endian `u64` words: bit `i` of the element is the
//! coefficient of `x^i`.

/// A sparse binary polynomial given by its nonzero exponents, highest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsePoly {
    exponents: Vec<u32>,
}

impl SparsePoly {
    /// Builds a polynomial from a strictly decreasing exponent list ending in 0.
    pub fn new(exponents: Vec<u32>) -> Option<Self> {
        let ok = exponents.len() >= 2
            && exponents.windows(2).all(|w| w[0] > w[1])
            && exponents.last() == Some(&0);
        ok.then_some(Self { exponents })
    }

    pub fn degree(&self) -> u32 {
        self.exponents[0]
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Exponents below the leading term.
    fn tail(&self) -> &[u32] {
        &self.exponents[1..]
    }
}

pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Carry-less product of two 64-bit words.
pub fn clmul64(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut acc = 0u128;
    let mut b = b;
    while b != 0 {
        let i = b.trailing_zeros();
        acc ^= a << i;
        b &= b - 1;
    }
    acc
}

/// Full carry-less product of two word vectors.
pub fn clmul(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y == 0 {
                continue;
            }
            let p = clmul64(x, y);
            out[i + j] ^= p as u64;
            out[i + j + 1] ^= (p >> 64) as u64;
        }
    }
    out
}

#[inline]
fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
fn flip_bit(words: &mut [u64], i: usize) {
    words[i / 64] ^= 1 << (i % 64);
}

/// Reduces `value` (any length) modulo `poly`, returning `words_for(n)` words.
pub fn reduce(mut value: Vec<u64>, poly: &SparsePoly) -> Vec<u64> {
    let n = poly.degree() as usize;
    let top = value.len() * 64;
    for i in (n..top).rev() {
        if get_bit(&value, i) {
            flip_bit(&mut value, i);
            for &e in poly.tail() {
                flip_bit(&mut value, i - n + e as usize);
            }
        }
    }
    value.truncate(words_for(n));
    value.resize(words_for(n), 0);
    value
}

/// Spreads the 32 bits of `x` to the even positions of a 64-bit word.
fn spread32(x: u32) -> u64 {
    let mut v = x as u64;
    v = (v | (v << 16)) & 0x0000_FFFF_0000_FFFF;
    v = (v | (v << 8)) & 0x00FF_00FF_00FF_00FF;
    v = (v | (v << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    v = (v | (v << 2)) & 0x3333_3333_3333_3333;
    (v | (v << 1)) & 0x5555_5555_5555_5555
}

/// `a^2 mod poly` in linear time (squaring over GF(2) interleaves zeros).
pub fn square_mod(a: &[u64], poly: &SparsePoly) -> Vec<u64> {
    let mut wide = Vec::with_capacity(a.len() * 2);
    for &w in a {
        wide.push(spread32(w as u32));
        wide.push(spread32((w >> 32) as u32));
    }
    reduce(wide, poly)
}

/// `a * b mod poly`; operands must already be reduced.
pub fn mul_mod(a: &[u64], b: &[u64], poly: &SparsePoly) -> Vec<u64> {
    reduce(clmul(a, b), poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    #[test]
    fn clmul64_small_cases() {
        assert_eq!(clmul64(0b11, 0b11), 0b101);
        assert_eq!(clmul64(u64::MAX, 1), u64::MAX as u128);
        assert_eq!(clmul64(1 << 63, 1 << 63), 1u128 << 126);
    }

    #[test]
    fn sparse_poly_validation() {
        assert!(SparsePoly::new(vec![8, 4, 3, 2, 0]).is_some());
        assert!(SparsePoly::new(vec![8, 4, 4, 0]).is_none());
        assert!(SparsePoly::new(vec![8, 4, 3]).is_none());
        assert!(SparsePoly::new(vec![0]).is_none());
    }

    #[test]
    fn squaring_matches_multiplication() {
        let poly = SparsePoly::new(vec![1024, 19, 6, 1, 0]).unwrap();
        let mut g = XorShift64Star::new(4);
        let a: Vec<u64> = (0..16).map(|_| g.next_u64()).collect();
        assert_eq!(square_mod(&a, &poly), mul_mod(&a, &a, &poly));
    }

    #[test]
    fn aes_field_reference_product() {
        // 0x57 * 0x83 = 0xC1 in the AES field x^8 + x^4 + x^3 + x + 1.
        let poly = SparsePoly::new(vec![8, 4, 3, 1, 0]).unwrap();
        assert_eq!(mul_mod(&[0x57], &[0x83], &poly), vec![0xC1]);
    }

    #[test]
    fn multiplication_commutes_and_distributes() {
        let poly = SparsePoly::new(vec![128, 7, 2, 1, 0]).unwrap();
        let mut g = XorShift64Star::new(1);
        for _ in 0..50 {
            let a = [g.next_u64(), g.next_u64()];
            let b = [g.next_u64(), g.next_u64()];
            let c = [g.next_u64(), g.next_u64()];
            assert_eq!(mul_mod(&a, &b, &poly), mul_mod(&b, &a, &poly));
            let bc = [b[0] ^ c[0], b[1] ^ c[1]];
            let lhs = mul_mod(&a, &bc, &poly);
            let r1 = mul_mod(&a, &b, &poly);
            let r2 = mul_mod(&a, &c, &poly);
            assert_eq!(lhs, vec![r1[0] ^ r2[0], r1[1] ^ r2[1]]);
        }
    }
}
