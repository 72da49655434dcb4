//! Binary entropy and the Shannon limit on reconciliation disclosure.

/// Binary entropy `h2(x)` in bits, with `h2(0) = h2(1) = 0`.
pub fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Minimum number of bits any reconciliation of `b` bits at error rate
/// `e_rate` must disclose.
pub fn shannon_limit(e_rate: f64, b: usize) -> f64 {
    h2(e_rate) * b as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_at_three_percent() {
        // High-precision reference: 796.229049678136...
        assert!((shannon_limit(0.03, 4096) - 796.229_049_678_136).abs() < 1e-9);
        assert_eq!(shannon_limit(0.0, 4096), 0.0);
        assert_eq!(shannon_limit(0.5, 4096), 4096.0);
    }

    #[test]
    fn entropy_is_symmetric_and_peaks_at_half() {
        for i in 1..50 {
            let x = i as f64 / 100.0;
            assert!((h2(x) - h2(1.0 - x)).abs() < 1e-12);
            assert!(h2(x) < h2(x + 0.01));
        }
    }
}
