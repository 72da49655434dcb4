//! Shipped field polynomials for the supported privacy-amplification sizes.
//!
//! Degrees 8 through 128 are primitive (checked in the tests below by order
//! computation). Degrees 256 and up are the lowest-weight entries from
//! G. Seroussi, "Table of Low-Weight Binary Irreducible Polynomials",
//! HP Labs Technical Report HPL-98-135 (1998). They are irreducible, which is
//! what the hash needs: every nonzero multiplier is invertible, so the family
//! stays universal. Their primitivity is not certified because 2^n - 1 is not
//! fully factored at those sizes.

use super::field::SparsePoly;

/// Supported input block lengths, ascending.
pub const SUPPORTED_SIZES: [usize; 11] = [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192];

const TABLE: [&[u32]; 11] = [
    &[8, 4, 3, 2, 0],
    &[16, 5, 3, 2, 0],
    &[32, 7, 6, 2, 0],
    &[64, 4, 3, 1, 0],
    &[128, 7, 2, 1, 0],
    &[256, 10, 5, 2, 0],
    &[512, 8, 5, 2, 0],
    &[1024, 19, 6, 1, 0],
    &[2048, 19, 14, 13, 0],
    &[4096, 27, 15, 1, 0],
    &[8192, 9, 5, 2, 0],
];

/// The shipped polynomial of degree `n`, if `n` is supported.
pub fn poly_for(n: usize) -> Option<SparsePoly> {
    let i = SUPPORTED_SIZES.iter().position(|&s| s == n)?;
    SparsePoly::new(TABLE[i].to_vec())
}

/// Smallest supported size holding `len` bits.
pub fn size_for(len: usize) -> Option<usize> {
    SUPPORTED_SIZES.iter().copied().find(|&s| s >= len)
}

#[cfg(test)]
mod tests {
    use super::super::field::{mul_mod, square_mod, words_for};
    use super::*;

    fn x(n: usize) -> Vec<u64> {
        let mut v = vec![0u64; words_for(n)];
        v[0] = 2;
        v
    }

    fn one(n: usize) -> Vec<u64> {
        let mut v = vec![0u64; words_for(n)];
        v[0] = 1;
        v
    }

    fn pow_x(e: u128, poly: &SparsePoly) -> Vec<u64> {
        let n = poly.degree() as usize;
        let mut acc = one(n);
        for i in (0..128).rev() {
            acc = square_mod(&acc, poly);
            if (e >> i) & 1 == 1 {
                acc = mul_mod(&acc, &x(n), poly);
            }
        }
        acc
    }

    fn degree(p: &[u64]) -> Option<usize> {
        p.iter()
            .rposition(|&w| w != 0)
            .map(|i| i * 64 + 63 - p[i].leading_zeros() as usize)
    }

    /// `a ^= b << shift` on word vectors; `a` must be long enough.
    fn xor_shifted(a: &mut [u64], b: &[u64], shift: usize) {
        let (ws, bs) = (shift / 64, shift % 64);
        for (i, &w) in b.iter().enumerate() {
            if w == 0 {
                continue;
            }
            a[i + ws] ^= w << bs;
            if bs != 0 && i + ws + 1 < a.len() {
                a[i + ws + 1] ^= w >> (64 - bs);
            }
        }
    }

    fn gcd(mut a: Vec<u64>, mut b: Vec<u64>) -> Vec<u64> {
        let len = a.len().max(b.len());
        a.resize(len, 0);
        b.resize(len, 0);
        loop {
            let Some(db) = degree(&b) else { return a };
            while let Some(da) = degree(&a) {
                if da < db {
                    break;
                }
                let snapshot = b.clone();
                xor_shifted(&mut a, &snapshot, da - db);
            }
            std::mem::swap(&mut a, &mut b);
        }
    }

    fn full_poly(poly: &SparsePoly) -> Vec<u64> {
        let n = poly.degree() as usize;
        let mut v = vec![0u64; words_for(n + 1)];
        for &e in poly.exponents() {
            v[e as usize / 64] ^= 1 << (e % 64);
        }
        v
    }

    /// Rabin's test specialised to power-of-two degrees, whose only prime
    /// divisor is 2: x^(2^n) = x mod f and gcd(x^(2^(n/2)) - x, f) = 1.
    fn is_irreducible(poly: &SparsePoly) -> bool {
        let n = poly.degree() as usize;
        let mut t = x(n);
        let mut half = Vec::new();
        for i in 1..=n {
            t = square_mod(&t, poly);
            if i == n / 2 {
                half = t.clone();
            }
        }
        if t != x(n) {
            return false;
        }
        half[0] ^= 2;
        degree(&gcd(full_poly(poly), half)) == Some(0)
    }

    #[test]
    fn every_entry_is_irreducible() {
        for &n in &SUPPORTED_SIZES {
            let poly = poly_for(n).unwrap();
            assert_eq!(poly.degree() as usize, n);
            assert!(is_irreducible(&poly), "degree {n}");
        }
    }

    #[test]
    fn reducible_polynomials_are_caught() {
        let p = SparsePoly::new(vec![8, 0]).unwrap(); // (x + 1)^8
        assert!(!is_irreducible(&p));
        let p = SparsePoly::new(vec![16, 8, 0]).unwrap(); // (x^8 + x^4 + 1)^2
        assert!(!is_irreducible(&p));
    }

    #[test]
    fn small_degrees_primitive_by_brute_order() {
        for n in [8usize, 16] {
            let poly = poly_for(n).unwrap();
            let mut t = x(n);
            let mut order = 1u64;
            while t != one(n) {
                t = mul_mod(&t, &x(n), &poly);
                order += 1;
            }
            assert_eq!(order, (1u64 << n) - 1, "degree {n}");
        }
    }

    #[test]
    fn medium_degrees_primitive_by_factored_order() {
        let cases: [(usize, &[u128]); 3] = [
            (32, &[3, 5, 17, 257, 65537]),
            (64, &[3, 5, 17, 257, 641, 65537, 6700417]),
            (
                128,
                &[
                    3,
                    5,
                    17,
                    257,
                    641,
                    65537,
                    274177,
                    6700417,
                    67280421310721,
                ],
            ),
        ];
        for (n, primes) in cases {
            let poly = poly_for(n).unwrap();
            let group = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
            assert_eq!(primes.iter().product::<u128>(), group);
            assert_eq!(pow_x(group, &poly), one(n), "degree {n}");
            for &q in primes {
                assert_ne!(pow_x(group / q, &poly), one(n), "degree {n}, q = {q}");
            }
        }
    }

    #[test]
    fn size_lookup_rounds_up() {
        assert_eq!(size_for(1), Some(8));
        assert_eq!(size_for(4096), Some(4096));
        assert_eq!(size_for(4097), Some(8192));
        assert_eq!(size_for(8193), None);
    }
}
