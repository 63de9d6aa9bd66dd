//! Faulty-address statistics for trees whose routers fail independently with
//! probability `epsilon`.
//!
//! Starred quantities (`*_protected`) condition on the three routers of
//! layers 1 and 2 being healthy.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Largest depth for which the availability distribution is computed. The
/// direct convolution costs `O(4^n)`.
pub const MAX_DISTRIBUTION_DEPTH: u32 = 16;

/// Expected number of inaccessible leaf addresses, `2^n (1 - (1-eps)^n)`.
pub fn expected_faulty_addresses(n: u32, epsilon: f64) -> f64 {
    2f64.powi(n as i32) * faulty_fraction(n, epsilon)
}

/// The same quantity evaluated through its layer recursion
/// `F_k = 2 eps (1-eps)^(k-1) 2^(k-1) + 2 F_(k-1)`, `F_1 = 2 eps`.
pub fn expected_faulty_addresses_recursive(n: u32, epsilon: f64) -> f64 {
    let mut f = 2.0 * epsilon;
    for k in 2..=n {
        let branches = 2f64.powi(k as i32 - 1);
        f = 2.0 * epsilon * (1.0 - epsilon).powi(k as i32 - 1) * branches + 2.0 * f;
    }
    f
}

/// Expected fraction of inaccessible addresses, `1 - (1-eps)^n`.
pub fn faulty_fraction(n: u32, epsilon: f64) -> f64 {
    1.0 - (1.0 - epsilon).powi(n as i32)
}

fn check_protected(n: u32) -> Result<()> {
    if n < 3 {
        return Err(invalid(format!(
            "protected-top statistics need depth >= 3, got {n}"
        )));
    }
    Ok(())
}

/// Expected inaccessible addresses with a healthy top: `4 F_(n-2)`.
pub fn expected_faulty_addresses_protected(n: u32, epsilon: f64) -> Result<f64> {
    check_protected(n)?;
    Ok(4.0 * expected_faulty_addresses(n - 2, epsilon))
}

/// `1 - (1-eps)^(n-2)`.
pub fn faulty_fraction_protected(n: u32, epsilon: f64) -> Result<f64> {
    check_protected(n)?;
    Ok(faulty_fraction(n - 2, epsilon))
}

/// Distribution of the number of accessible addresses of a depth-`n` tree.
#[derive(Clone, Debug, Serialize)]
pub struct AvailabilityDistribution {
    pub n: u32,
    pub epsilon: f64,
    /// `p[l]` is the probability that exactly `l` addresses are accessible,
    /// for `l = 0..=2^n`.
    pub p: Vec<f64>,
}

impl AvailabilityDistribution {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Probability that fewer than `2^(n-1)` addresses are accessible.
    pub fn below_half(&self) -> f64 {
        let half = 1usize << (self.n - 1);
        self.p[..half].iter().sum()
    }
}

/// Evaluate the availability distribution by convolving the two child
/// distributions layer by layer: a healthy router's count is the sum of its
/// children's counts, a faulty router's count is zero.
pub fn availability_distribution(n: u32, epsilon: f64) -> Result<AvailabilityDistribution> {
    if n == 0 || n > MAX_DISTRIBUTION_DEPTH {
        return Err(invalid(format!(
            "distribution depth {n} outside [1, {MAX_DISTRIBUTION_DEPTH}]"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    // Counts are always even; `pairs[j]` holds the probability of `2j` addresses.
    let mut pairs = vec![epsilon, 1.0 - epsilon];
    for _ in 2..=n {
        let len = 2 * (pairs.len() - 1) + 1;
        let mut next = vec![0.0; len];
        for (i, &a) in pairs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in pairs.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        for v in next.iter_mut() {
            *v *= 1.0 - epsilon;
        }
        next[0] += epsilon;
        pairs = next;
    }
    let mut p = vec![0.0; 2 * (pairs.len() - 1) + 1];
    for (j, v) in pairs.into_iter().enumerate() {
        p[2 * j] = v;
    }
    Ok(AvailabilityDistribution { n, epsilon, p })
}

/// Probability that a depth-`n` tree has fewer than `2^(n-1)` accessible
/// addresses.
pub fn unrepairable_probability(n: u32, epsilon: f64) -> Result<f64> {
    Ok(availability_distribution(n, epsilon)?.below_half())
}

/// Unrepairable probability conditioned on a healthy top.
///
/// Removes from the unconditioned probability the configurations in which a
/// top router is faulty (root faulty; both layer-2 routers faulty; one
/// layer-2 router faulty and at least one further fault on the other side)
/// and renormalizes by `(1-eps)^3`.
pub fn unrepairable_probability_protected(n: u32, epsilon: f64) -> Result<f64> {
    check_protected(n)?;
    let p = unrepairable_probability(n, epsilon)?;
    let q = 1.0 - epsilon;
    if q == 0.0 {
        // Every router below layer 2 is faulty.
        return Ok(1.0);
    }
    let other_side_routers = (1i32 << (n - 1)) - 2;
    let overcount = epsilon
        + epsilon * epsilon * q
        + 2.0 * epsilon * q * q * (1.0 - q.powi(other_side_routers));
    let x = (p - overcount) / (q * q * q);
    Ok(clamp_probability(x))
}

fn clamp_probability(x: f64) -> f64 {
    // Cancellation near eps -> 0 leaves tiny negative residues.
    x.clamp(0.0, 1.0)
}

/// One row of the `stats` table.
#[derive(Clone, Debug, Serialize)]
pub struct StatsRow {
    pub n: u32,
    pub epsilon: f64,
    pub f_star: f64,
    #[serde(rename = "F_star")]
    pub big_f_star: f64,
    /// `None` when `n` exceeds [`MAX_DISTRIBUTION_DEPTH`].
    pub p_unrepair_star: Option<f64>,
}

pub fn stats_row(n: u32, epsilon: f64) -> Result<StatsRow> {
    let p_unrepair_star = if n <= MAX_DISTRIBUTION_DEPTH {
        Some(unrepairable_probability_protected(n, epsilon)?)
    } else {
        None
    };
    Ok(StatsRow {
        n,
        epsilon,
        f_star: faulty_fraction_protected(n, epsilon)?,
        big_f_star: expected_faulty_addresses_protected(n, epsilon)?,
        p_unrepair_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn one_router_tree() {
        for eps in [0.0, 0.01, 0.3, 1.0] {
            assert!(close(expected_faulty_addresses(1, eps), 2.0 * eps, 1e-15));
            let d = availability_distribution(1, eps).unwrap();
            assert_eq!(d.p, vec![eps, 0.0, 1.0 - eps]);
        }
    }

    #[test]
    fn zero_failure_rate() {
        for n in 1..=10 {
            assert_eq!(expected_faulty_addresses(n, 0.0), 0.0);
            let d = availability_distribution(n, 0.0).unwrap();
            let top = 1usize << n;
            assert!(d.p.iter().enumerate().all(|(l, &v)| v == if l == top { 1.0 } else { 0.0 }));
            assert_eq!(unrepairable_probability(n, 0.0).unwrap(), 0.0);
        }
        for n in 3..=10 {
            assert_eq!(expected_faulty_addresses_protected(n, 0.0).unwrap(), 0.0);
            assert_eq!(unrepairable_probability_protected(n, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_form_matches_recursion_at_five() {
        // F_5(0.1) by hand from the recursion: F_1 = 0.2,
        // F_k = 0.2 * 0.9^(k-1) * 2^(k-1) + 2 F_(k-1).
        let mut f = 0.2;
        for k in 2..=5 {
            f = 0.2 * 0.9f64.powi(k - 1) * 2f64.powi(k - 1) + 2.0 * f;
        }
        assert!(close(expected_faulty_addresses(5, 0.1), f, 1e-12));
        assert!(close(32.0 * (1.0 - 0.9f64.powi(5)), f, 1e-12));
    }

    #[test]
    fn two_layer_distribution() {
        // Enumerated over the 8 configurations of a three-router tree.
        let eps = 0.17;
        let q = 1.0 - eps;
        let d = availability_distribution(2, eps).unwrap();
        assert!(close(d.p[0], eps + q * eps * eps, 1e-14));
        assert!(close(d.p[2], 2.0 * eps * q * q, 1e-14));
        assert!(close(d.p[4], q * q * q, 1e-14));
        assert_eq!(d.p[1], 0.0);
        assert_eq!(d.p[3], 0.0);
        assert!(close(unrepairable_probability(2, eps).unwrap(), eps + q * eps * eps, 1e-14));
    }

    #[test]
    fn faulty_addresses_n13() {
        let f = expected_faulty_addresses_protected(13, 0.01).unwrap();
        assert!((f - 857.3).abs() < 0.1, "{f}");
    }

    #[test]
    fn protected_requires_depth_three() {
        assert!(expected_faulty_addresses_protected(2, 0.1).is_err());
        assert!(unrepairable_probability_protected(2, 0.1).is_err());
        assert!(faulty_fraction_protected(2, 0.1).is_err());
    }

    #[test]
    fn protected_unrepairable_trend() {
        let p = unrepairable_probability_protected(13, 0.08).unwrap();
        assert!(p > 0.8 && p > unrepairable_probability_protected(9, 0.08).unwrap(), "{p}");
        assert_eq!(unrepairable_probability_protected(5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn monotone_in_epsilon() {
        for n in 1..=9 {
            let mut last = 0.0;
            for i in 0..=50 {
                let p = unrepairable_probability(n, i as f64 / 50.0).unwrap();
                assert!(p >= last - 1e-12, "n={n} i={i}");
                last = p;
            }
        }
    }

    #[test]
    fn distribution_normalized() {
        for n in 1..=13 {
            for eps in [0.001, 0.04, 0.5] {
                let d = availability_distribution(n, eps).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-9);
                assert!(d.p.iter().skip(1).step_by(2).all(|&v| v == 0.0));
            }
        }
    }
}
