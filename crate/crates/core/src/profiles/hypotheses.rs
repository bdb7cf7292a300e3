//! Numerical certificates for the structural hypotheses on (r, K): signs,
//! non-constancy, monotonicity of r and r/K, flatness of K/r at the ends,
//! convexity of K/r, and the K range conditions.
//!
//! These are finite-difference checks at a tolerance, not proofs; margins are
//! reported as signed dimensionless slack so callers can see how close a
//! profile pair sits to a hypothesis boundary.

use serde::Serialize;

use crate::error::Result;
use crate::grid::Grid;
use crate::numeric::gradient;
use crate::profiles::Profile;

/// Non-constancy tolerance, relative to max |p|.
pub const TAU_CONST: f64 = 1e-10;

/// Allowed sign violation for derivative inequalities, relative to scale.
pub const TAU_SIGN: f64 = 1e-8;

/// Tolerance for the endpoint flatness conditions (K/r)'(0) = (K/r)'(1) = 0,
/// relative to the derivative scale of K/r.
pub const TAU_ENDPOINT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisCheck {
    pub passed: bool,
    /// Signed slack: positive means the inequality holds with room to spare,
    /// negative measures the worst violation. Dimensionless (normalized by
    /// the scale of the quantity being tested).
    pub margin: f64,
}

fn check(margin: f64, tol: f64) -> HypothesisCheck {
    HypothesisCheck { passed: margin >= -tol, margin }
}

/// Outcome of every checkable hypothesis for a profile pair on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub r_positive: HypothesisCheck,
    pub k_positive: HypothesisCheck,
    pub r_nonconstant: HypothesisCheck,
    pub k_nonconstant: HypothesisCheck,
    /// (r/K)'(x) <= 0 on [0, 1].
    pub ratio_rk_nonincreasing: HypothesisCheck,
    /// r'(x) >= 0 on [0, 1].
    pub r_nondecreasing: HypothesisCheck,
    /// (K/r)'(0) = 0.
    pub ratio_kr_flat_at_0: HypothesisCheck,
    /// (K/r)'(1) = 0.
    pub ratio_kr_flat_at_1: HypothesisCheck,
    /// max K <= 2 min K.
    pub k_range_within_factor_two: HypothesisCheck,
    /// min K >= 1.
    pub k_at_least_one: HypothesisCheck,
    /// (K/r)''(x) >= 0 on [0, 1].
    pub ratio_kr_convex: HypothesisCheck,
}

impl HypothesisReport {
    /// All hypotheses the main theorem assumes jointly.
    pub fn theorem_hypotheses_pass(&self) -> bool {
        self.basic_pass()
            && self.ratio_rk_nonincreasing.passed
            && self.r_nondecreasing.passed
            && self.ratio_kr_flat_at_0.passed
            && self.ratio_kr_flat_at_1.passed
            && self.k_range_within_factor_two.passed
            && self.k_at_least_one.passed
            && self.ratio_kr_convex.passed
    }

    /// Positivity and non-constancy of both profiles.
    pub fn basic_pass(&self) -> bool {
        self.r_positive.passed
            && self.k_positive.passed
            && self.r_nonconstant.passed
            && self.k_nonconstant.passed
    }

    /// Hypotheses under which the habitat-average excess (mean of the closed
    /// habitat steady state exceeding the mean carrying capacity) is proved.
    pub fn mean_excess_hypotheses_pass(&self) -> bool {
        self.ratio_kr_flat_at_0.passed
            && self.ratio_kr_flat_at_1.passed
            && self.k_at_least_one.passed
            && self.ratio_kr_convex.passed
    }
}

/// Evaluate all hypothesis certificates for (r, K) using central finite
/// differences on a sampling at least 4x finer than `grid`.
pub fn check_hypotheses(r: &Profile, k: &Profile, grid: &Grid) -> Result<HypothesisReport> {
    // Uniform sampling including the endpoints; derivatives at 0 and 1 come
    // from one-sided second-order stencils inside `gradient`.
    let m = 4 * grid.n();
    let dx = 1.0 / m as f64;
    let xs: Vec<f64> = (0..=m).map(|i| i as f64 * dx).collect();
    let rv: Vec<f64> = xs.iter().map(|&x| r.eval(x)).collect();
    let kv: Vec<f64> = xs.iter().map(|&x| k.eval(x)).collect();
    for (x, v) in xs.iter().zip(rv.iter().chain(kv.iter())) {
        if !v.is_finite() {
            return Err(crate::error::Error::NonFinite { x: *x, value: *v });
        }
    }

    let min_max = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (r_min, r_max) = min_max(&rv);
    let (k_min, k_max) = min_max(&kv);
    let r_scale = r_max.abs().max(r_min.abs()).max(1e-300);
    let k_scale = k_max.abs().max(k_min.abs()).max(1e-300);

    let rk: Vec<f64> = rv.iter().zip(&kv).map(|(a, b)| a / b).collect();
    let kr: Vec<f64> = kv.iter().zip(&rv).map(|(a, b)| a / b).collect();
    let rk_grad = gradient(&rk, dx);
    let kr_grad = gradient(&kr, dx);
    let r_grad = gradient(&rv, dx);
    let kr_curv = gradient(&kr_grad, dx);

    let grad_scale = |g: &[f64], base: f64| {
        g.iter().fold(base, |m: f64, &x| m.max(x.abs())).max(1e-300)
    };
    let rk_scale = grad_scale(&rk_grad, rk.iter().fold(0.0_f64, |m, &x| m.max(x.abs())));
    let kr_grad_scale = grad_scale(&kr_grad, kr.iter().fold(0.0_f64, |m, &x| m.max(x.abs())));
    let kr_curv_scale = grad_scale(&kr_curv, kr_grad_scale);

    let worst_max = |g: &[f64]| g.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let worst_min = |g: &[f64]| g.iter().fold(f64::INFINITY, |m, &x| m.min(x));

    Ok(HypothesisReport {
        r_positive: check(r_min / r_scale, 0.0),
        k_positive: check(k_min / k_scale, 0.0),
        r_nonconstant: check((r_max - r_min) / r_scale - TAU_CONST, 0.0),
        k_nonconstant: check((k_max - k_min) / k_scale - TAU_CONST, 0.0),
        ratio_rk_nonincreasing: check(-worst_max(&rk_grad) / rk_scale, TAU_SIGN),
        r_nondecreasing: check(worst_min(&r_grad) / grad_scale(&r_grad, r_scale), TAU_SIGN),
        ratio_kr_flat_at_0: check(-(kr_grad[0].abs()) / kr_grad_scale, TAU_ENDPOINT),
        ratio_kr_flat_at_1: check(-(kr_grad[m].abs()) / kr_grad_scale, TAU_ENDPOINT),
        k_range_within_factor_two: check((2.0 * k_min - k_max) / k_scale, 0.0),
        k_at_least_one: check(k_min - 1.0, 0.0),
        ratio_kr_convex: check(worst_min(&kr_curv) / kr_curv_scale, TAU_SIGN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{p1, p2, p3, parse_profile};

    fn grid() -> Grid {
        Grid::new(64).unwrap()
    }

    #[test]
    fn proportional_pair_passes_everything() {
        // K/r constant => (K/r)' == 0 and (K/r)'' == 0 identically;
        // min K = 1.5, max K / min K = (1.5 * 1.5) / 1.5 = 1.5 <= 2
        let (r, k) = p1();
        let rep = check_hypotheses(&r, &k, &grid()).unwrap();
        assert!(rep.theorem_hypotheses_pass(), "{rep:#?}");
        assert!(rep.mean_excess_hypotheses_pass());
    }

    #[test]
    fn constants_fail_nonconstancy() {
        let c = parse_profile("1").unwrap();
        let rep = check_hypotheses(&c, &c, &grid()).unwrap();
        assert!(!rep.r_nonconstant.passed);
        assert!(!rep.k_nonconstant.passed);
        assert!(rep.r_positive.passed);
    }

    #[test]
    fn rising_r_falling_k_breaks_ratio_monotonicity() {
        // r/K increases somewhere when K decreases while r increases
        let (r, k) = p2();
        let rep = check_hypotheses(&r, &k, &grid()).unwrap();
        assert!(!rep.ratio_rk_nonincreasing.passed);
        assert!(rep.basic_pass());
        assert!(rep.k_range_within_factor_two.passed); // 2.5 <= 2 * 1.5
    }

    #[test]
    fn equal_pair_keeps_ratio_flat() {
        let (r, k) = p3();
        let rep = check_hypotheses(&r, &k, &grid()).unwrap();
        assert!(rep.ratio_rk_nonincreasing.passed);
        assert!(rep.ratio_kr_flat_at_0.passed);
        assert!(rep.ratio_kr_flat_at_1.passed);
        assert!(rep.k_at_least_one.passed);
    }

    #[test]
    fn margins_stable_under_tiny_scaling() {
        let (r, k) = p1();
        let k_scaled = parse_profile("1.000001*(1.5*(1 + 0.5*x))").unwrap();
        let a = check_hypotheses(&r, &k, &grid()).unwrap();
        let b = check_hypotheses(&r, &k_scaled, &grid()).unwrap();
        let pairs = [
            (a.r_positive, b.r_positive),
            (a.k_positive, b.k_positive),
            (a.r_nonconstant, b.r_nonconstant),
            (a.k_nonconstant, b.k_nonconstant),
            (a.ratio_rk_nonincreasing, b.ratio_rk_nonincreasing),
            (a.r_nondecreasing, b.r_nondecreasing),
            (a.ratio_kr_flat_at_0, b.ratio_kr_flat_at_0),
            (a.ratio_kr_flat_at_1, b.ratio_kr_flat_at_1),
            (a.k_range_within_factor_two, b.k_range_within_factor_two),
            (a.k_at_least_one, b.k_at_least_one),
            (a.ratio_kr_convex, b.ratio_kr_convex),
        ];
        for (x, y) in pairs {
            if x.margin.abs() > 1e-3 {
                assert_eq!(x.passed, y.passed, "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn reproducible() {
        let (r, k) = p2();
        let a = check_hypotheses(&r, &k, &grid()).unwrap();
        let b = check_hypotheses(&r, &k, &grid()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
