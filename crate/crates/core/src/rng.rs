//! Counter-based random derivation.
//!
//! Every random decision in the simulator is a pure function of a seed and a
//! small tuple of integers (router position, shot index, ...). Results are
//! therefore independent of platform, thread count and evaluation order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a seed together with a sequence of counters.
#[inline]
pub fn derive(seed: u64, counters: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &c) in counters.iter().enumerate() {
        h = mix64(h.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)) ^ mix64(c));
    }
    h
}

/// Map a 64-bit hash to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli draw keyed by `(seed, counter)`.
#[inline]
pub fn bernoulli(seed: u64, counter: u64, p: f64) -> bool {
    unit_f64(derive(seed, &[counter])) < p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_pure_and_order_sensitive() {
        assert_eq!(derive(7, &[1, 2, 3]), derive(7, &[1, 2, 3]));
        assert_ne!(derive(7, &[1, 2, 3]), derive(7, &[3, 2, 1]));
        assert_ne!(derive(7, &[1]), derive(8, &[1]));
    }

    #[test]
    fn unit_interval() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn bernoulli_frequency() {
        let hits = (0..200_000u64).filter(|&c| bernoulli(42, c, 0.3)).count();
        let p = hits as f64 / 200_000.0;
        // sigma ~ 0.001
        assert!((p - 0.3).abs() < 0.005, "{p}");
    }
}
