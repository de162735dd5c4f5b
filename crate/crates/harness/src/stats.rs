//! Binomial interval estimates.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Standard error of a proportion estimated from `n` trials.
pub fn std_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // 0 of 10: upper limit z^2 / (n + z^2).
        let (lo, hi) = wilson(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert!((lo - 0.403_831_7).abs() < 1e-6);
    }

    #[test]
    fn wilson_contains_estimate() {
        for n in [1u64, 7, 100, 12345] {
            for k in 0..=n.min(50) {
                let (lo, hi) = wilson(k, n, Z95);
                let p = k as f64 / n as f64;
                assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
            }
        }
    }
}
