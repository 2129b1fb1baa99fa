//! Closed-form concentration and divergence bounds.
//!
//! These are used as independent oracles by the Monte Carlo suites: they
//! never call into the estimators they check.

use crate::error::{domain, Result};

/// A two-sided interval with the probability of falling outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub lo: f64,
    pub hi: f64,
    /// Upper bound on `P[N ∉ [lo, hi]]`. May exceed 1 (vacuous bound).
    pub failure_prob: f64,
}

impl TailBound {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Negative-binomial concentration: the number of Ber(p) draws needed for τ
/// successes lies in `[(1−ε)τ/p, (1+ε)τ/p]` except with probability at most
/// `2 exp(−τε²/4)`.
pub fn negbin_bounds(tau: usize, p: f64, eps: f64) -> Result<TailBound> {
    if tau == 0 {
        return domain("tau must be at least 1");
    }
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p must lie in (0, 1), got {p}"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return domain(format!("eps must lie in [0, 1], got {eps}"));
    }
    let center = tau as f64 / p;
    Ok(TailBound {
        lo: (1.0 - eps) * center,
        hi: (1.0 + eps) * center,
        failure_prob: 2.0 * (-(tau as f64) * eps * eps / 4.0).exp(),
    })
}

/// Multiplicative Chernoff bound `P[|X − μ| ≥ εμ] ≤ 2 exp(−με²/3)`.
pub fn chernoff_bound(mu: f64, eps: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return domain(format!("mu must be positive, got {mu}"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    Ok(2.0 * (-mu * eps * eps / 3.0).exp())
}

/// `KL(Ber(p) ‖ Ber(q))` in nats.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return domain(format!("{name} must lie in (0, 1), got {v}"));
        }
    }
    let kl = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    Ok(kl.max(0.0))
}

/// `(1 − 2ε, 1 + 4ε)`, which bracket `(1−ε)/(1+ε)` from below and
/// `(1+ε)/(1−ε)` from above for ε ∈ (0, 1/2).
pub fn ratio_bounds(eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < 0.5) {
        return domain(format!("eps must lie in (0, 1/2), got {eps}"));
    }
    Ok((1.0 - 2.0 * eps, 1.0 + 4.0 * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn negbin_example_values() {
        let b = negbin_bounds(100, 0.5, 0.2).unwrap();
        assert_abs_diff_eq!(b.lo, 160.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.hi, 240.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.failure_prob, 0.735_758_882_342_885, epsilon = 1e-12);

        let b = negbin_bounds(2000, 0.3, 0.1).unwrap();
        assert_abs_diff_eq!(b.failure_prob, 0.013_475_893_998_170_934, epsilon = 1e-12);
        assert_abs_diff_eq!(b.lo, 6000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.hi, 7333.333_333_333_333, epsilon = 1e-9);
    }

    #[test]
    fn negbin_degenerate_eps() {
        let b = negbin_bounds(10, 0.25, 0.0).unwrap();
        assert_eq!(b.lo, b.hi);
        assert_abs_diff_eq!(b.lo, 40.0);
        assert_abs_diff_eq!(b.failure_prob, 2.0);
    }

    #[test]
    fn negbin_domain_errors() {
        assert!(negbin_bounds(0, 0.5, 0.1).is_err());
        assert!(negbin_bounds(5, 1.0, 0.1).is_err());
        assert!(negbin_bounds(5, 0.5, 1.5).is_err());
    }

    #[test]
    fn chernoff_examples() {
        assert_abs_diff_eq!(chernoff_bound(300.0, 0.1).unwrap(), 0.735_758_882_342_885, epsilon = 1e-12);
        assert_abs_diff_eq!(chernoff_bound(3000.0, 0.1).unwrap(), 9.079_985_952_496_97e-5, epsilon = 1e-15);
        assert!(chernoff_bound(0.0, 0.1).is_err());
        assert!(chernoff_bound(1.0, 1.0).is_err());
    }

    #[test]
    fn chernoff_monotone_in_mu() {
        let mut prev = f64::INFINITY;
        for mu in [1.0, 10.0, 100.0, 1000.0] {
            let b = chernoff_bound(mu, 0.2).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn kl_examples() {
        assert_abs_diff_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_bernoulli(0.1, 0.2).unwrap(), 0.036_690_014_034_750_58, epsilon = 1e-12);
        assert!(kl_bernoulli(0.0, 0.5).is_err());
        assert!(kl_bernoulli(0.5, 1.0).is_err());
    }

    #[test]
    fn kl_quadratic_upper_bound_example() {
        let (q, eps) = (0.3, 0.05);
        assert!(8.0 * q * eps / (1.0 - q) <= 1.0);
        let lhs = kl_bernoulli(q, q * (1.0 + 8.0 * eps)).unwrap();
        assert!(lhs <= 64.0 * q * eps * eps);
        assert_abs_diff_eq!(64.0 * q * eps * eps, 0.048, epsilon = 1e-12);
    }

    #[test]
    fn kl_dominates_pinsker_on_grid() {
        for i in 1..=20 {
            for j in 1..=20 {
                let p = i as f64 / 21.0;
                let q = j as f64 / 21.0;
                let kl = kl_bernoulli(p, q).unwrap();
                assert!(kl + 1e-15 >= 2.0 * (p - q).powi(2), "p={p} q={q}");
            }
        }
    }

    #[test]
    fn kl_reverse_quadratic_bound_on_grid() {
        for q in [0.1, 0.3] {
            for eps in [0.02, 0.05] {
                assert!(8.0 * q * eps / (1.0 - q) <= 1.0);
                let kl = kl_bernoulli(q * (1.0 + 8.0 * eps), q).unwrap();
                assert!(kl <= 128.0 * q * eps * eps, "q={q} eps={eps}");
                let kl = kl_bernoulli(q, q * (1.0 + 8.0 * eps)).unwrap();
                assert!(kl <= 64.0 * q * eps * eps, "q={q} eps={eps}");
            }
        }
    }

    #[test]
    fn ratio_bounds_bracket() {
        let (lo, hi) = ratio_bounds(0.1).unwrap();
        assert_abs_diff_eq!(lo, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.4, epsilon = 1e-12);
        assert!(0.9 / 1.1 >= lo);
        assert!(1.1 / 0.9 <= hi);
        let (lo, hi) = ratio_bounds(0.25).unwrap();
        assert_abs_diff_eq!(lo, 0.5);
        assert_abs_diff_eq!(hi, 2.0);
        let (lo, hi) = ratio_bounds(1e-12).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-10);
        assert!(ratio_bounds(0.5).is_err());
        assert!(ratio_bounds(0.0).is_err());
    }

    #[test]
    fn ratio_bounds_hold_on_grid() {
        for i in 1..50 {
            let eps = i as f64 / 100.0;
            let (lo, hi) = ratio_bounds(eps).unwrap();
            assert!((1.0 - eps) / (1.0 + eps) >= lo - 1e-15);
            assert!((1.0 + eps) / (1.0 - eps) <= hi + 1e-15);
        }
    }
}
