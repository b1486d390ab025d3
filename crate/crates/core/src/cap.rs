//! Spherical caps and sample-complexity formulas.
//!
//! A cap `C(c, ε) = {x ∈ S : cᵀx > δ(ε)}` of the unit sphere in `Rⁿ` has
//! uniform measure `ε` when
//!
//! ```text
//! δ(ε) = sqrt(1 − I⁻¹(2ε; (n−1)/2, 1/2))      for ε < 1/2,
//! δ(ε) = 0                                    for ε ≥ 1/2,
//! ```
//!
//! with `I` the regularized incomplete beta function. Two points in the same
//! cap are at most `Δ(ε) = sqrt(2 − 2δ(ε))` apart. The rest of the module
//! converts confidence levels into cap measures and back.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

const INV_MAX_ITER: usize = 200;

fn check_shape(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!(
            "incomplete beta needs a > 0 and b > 0 (got a = {a}, b = {b})"
        )));
    }
    Ok(())
}

/// Regularized incomplete beta function `I(x; a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("incomplete beta needs x ∈ [0, 1] (got {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    Ok(beta_reg(a, b, x).clamp(0.0, 1.0))
}

/// Inverse of `x ↦ I(x; a, b)`: the `x ∈ [0, 1]` with `I(x; a, b) = y`.
///
/// Safeguarded Newton iteration: the root stays bracketed and any Newton step
/// leaving the bracket is replaced by a bisection step.
pub fn inv_reg_inc_beta(y: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::invalid(format!("inverse incomplete beta needs y ∈ [0, 1] (got {y})")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(1.0);
    }

    let lb = ln_beta(a, b);
    // Leading-order tail inversions as a starting point.
    let head = (y.ln() + a.ln() + lb) / a;
    let tail = ((1.0 - y).ln() + b.ln() + lb) / b;
    let mut x = if head < 0.5f64.ln() {
        head.exp()
    } else if tail < 0.5f64.ln() {
        1.0 - tail.exp()
    } else {
        0.5
    };
    if !(x > 0.0 && x < 1.0) {
        x = 0.5;
    }

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..INV_MAX_ITER {
        let f = beta_reg(a, b, x) - y;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_density = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lb;
        let step = f / log_density.exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi
        {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Cap threshold `δ(ε)` on the unit sphere of `Rⁿ`.
///
/// Returns exactly `0` for `ε ≥ 1/2`.
pub fn delta_cap(eps: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("cap threshold needs n ≥ 2 (got {n})")));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("cap measure must be positive (got {eps})")));
    }
    if eps >= 0.5 {
        return Ok(0.0);
    }
    let a = 0.5 * (n as f64 - 1.0);
    let y = 2.0 * eps;
    // 1 − I⁻¹(y; a, ½) = I⁻¹(1 − y; ½, a); solve whichever side keeps the
    // small quantity small, so δ does not lose digits to cancellation.
    let one_minus_x = if y <= 0.5 {
        1.0 - inv_reg_inc_beta(y, a, 0.5)?
    } else {
        inv_reg_inc_beta(1.0 - y, 0.5, a)?
    };
    Ok(one_minus_x.max(0.0).sqrt())
}

/// Chord bound `Δ = sqrt(2 − 2δ)`.
pub fn chord_bound(delta: f64) -> f64 {
    (2.0 - 2.0 * delta).max(0.0).sqrt()
}

/// Cap measure with its threshold and chord bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapParams {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub chord: f64,
    /// `ε ≥ 1/2`, so `δ = 0` and the cap is a full hemisphere or more.
    pub saturated: bool,
}

impl CapParams {
    pub fn new(eps: f64, n: usize) -> Result<Self> {
        let delta = delta_cap(eps, n)?;
        Ok(Self {
            epsilon: eps,
            delta,
            chord: chord_bound(delta),
            saturated: eps >= 0.5,
        })
    }
}

/// `1 − q^{1/N}` without cancellation.
fn one_minus_root(q: f64, n_samples: usize) -> f64 {
    -(q.ln() / n_samples as f64).exp_m1()
}

/// Cap measure covered with confidence `β` by `N` samples, for a program with
/// `d1` free variables:
/// `ε = m^l (1 − ((1−β)/(d1+1))^{1/N})`.
///
/// `d1 = n(n+1)/2` gives the quadratic case, `d1 = D(D+1)/2` the SOS case.
pub fn eps_cover(beta: f64, ml: f64, d1: usize, n_samples: usize) -> f64 {
    let q = (1.0 - beta) / (d1 as f64 + 1.0);
    ml * one_minus_root(q, n_samples)
}

/// Confidence of the covering event, `1 − (d1+1)(1 − ε/m^l)^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Unclamped value; negative when the bound is vacuous.
    pub raw: f64,
    /// `max(raw, 0)`.
    pub value: f64,
    pub vacuous: bool,
}

/// Inverse of [`eps_cover`]: the confidence attached to a cap measure `ε`.
pub fn beta_from_eps(eps: f64, ml: f64, d1: usize, n_samples: usize) -> Result<Coverage> {
    if !(eps > 0.0) || eps > ml {
        return Err(Error::invalid(format!("cap measure must lie in (0, m^l] (got {eps}, m^l = {ml})")));
    }
    let miss = (n_samples as f64 * (-eps / ml).ln_1p()).exp();
    let raw = 1.0 - (d1 as f64 + 1.0) * miss;
    Ok(Coverage {
        raw,
        value: raw.max(0.0),
        vacuous: raw < 0.0,
    })
}

/// Violation measure for the gain bound: `ε₁ = (m^l / 2)(1 − (1−β₁)^{1/N})`.
pub fn eps_one(beta1: f64, m: usize, l: usize, n_samples: usize) -> f64 {
    if beta1 == 0.0 {
        return 0.0;
    }
    let ml = (m as f64).powi(l as i32);
    0.5 * ml * one_minus_root(1.0 - beta1, n_samples)
}

/// Smallest `N` with `ε₁(β₁, m, l, N) < 1/2`, i.e. the first sample size at
/// which the gain bound (and hence the JSR bound) is finite.
pub fn min_samples_finite(beta1: f64, m: usize, l: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::invalid(format!("β₁ must lie in [0, 1) (got {beta1})")));
    }
    if m == 0 || l == 0 {
        return Err(Error::invalid("m and l must be at least 1"));
    }
    if beta1 == 0.0 || eps_one(beta1, m, l, 1) < 0.5 {
        return Ok(1);
    }
    // ε₁ < 1/2  ⇔  N > ln(1−β₁) / ln(1 − 1/m^l).
    let ml = (m as f64).powi(l as i32);
    let estimate = ((1.0 - beta1).ln() / (-1.0 / ml).ln_1p()).floor().max(1.0) as usize;
    let mut n = estimate.saturating_sub(2).max(1);
    while eps_one(beta1, m, l, n) >= 0.5 {
        n += 1;
    }
    while n > 1 && eps_one(beta1, m, l, n - 1) < 0.5 {
        n -= 1;
    }
    Ok(n)
}

/// Confidence levels and problem sizes entering the final bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBudget {
    /// Confidence of the covering event.
    pub beta: f64,
    /// Confidence of the gain bound.
    pub beta1: f64,
    /// Upper bound on the number of modes.
    pub m: usize,
    /// Trace length.
    pub l: usize,
    #[serde(rename = "N")]
    pub n_samples: usize,
    /// State dimension.
    pub n: usize,
    /// Half-degree of the Lyapunov function.
    pub d: usize,
}

impl ConfidenceBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("β", self.beta), ("β₁", self.beta1)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1) (got {v})")));
            }
        }
        if self.m == 0 || self.l == 0 || self.n_samples == 0 || self.d == 0 {
            return Err(Error::invalid("m, l, N and d must all be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::invalid("state dimension must be at least 2"));
        }
        Ok(())
    }

    /// `m^l`.
    pub fn ml(&self) -> f64 {
        (self.m as f64).powi(self.l as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn forward_examples() {
        assert_eq!(reg_inc_beta(1.0, 2.3, 0.7).unwrap(), 1.0);
        assert_abs_diff_eq!(reg_inc_beta(0.5, 0.5, 0.5).unwrap(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(reg_inc_beta(0.25, 1.0, 1.0).unwrap(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn forward_matches_arcsine_law() {
        for k in 1..100 {
            let x = k as f64 / 100.0;
            let exact = 2.0 / PI * x.sqrt().asin();
            assert_abs_diff_eq!(reg_inc_beta(x, 0.5, 0.5).unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_rejects_bad_shape() {
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -1.0).is_err());
        assert!(inv_reg_inc_beta(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inv_reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(inv_reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        // I(x; 1, ½) = 1 − sqrt(1 − x)  ⇒  x = 1 − (1 − y)².
        assert_abs_diff_eq!(inv_reg_inc_beta(0.36, 1.0, 0.5).unwrap(), 0.5904, epsilon = 1e-13);
        assert_abs_diff_eq!(inv_reg_inc_beta(0.5, 0.5, 0.5).unwrap(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn delta_examples() {
        assert_abs_diff_eq!(delta_cap(0.25, 2).unwrap(), (PI * 0.25).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(delta_cap(0.1, 3).unwrap(), 0.8, epsilon = 1e-12);
        assert_eq!(delta_cap(0.6, 5).unwrap(), 0.0);
        assert_eq!(delta_cap(0.5, 2).unwrap(), 0.0);
        assert!(delta_cap(0.0, 3).is_err());
        assert!(delta_cap(-0.1, 3).is_err());
        assert!(delta_cap(0.1, 1).is_err());
    }

    #[test]
    fn delta_closed_forms_on_grid() {
        for k in 0..100 {
            let eps = (k as f64 + 0.5) / 200.0;
            assert_abs_diff_eq!(delta_cap(eps, 2).unwrap(), (PI * eps).cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(delta_cap(eps, 3).unwrap(), 1.0 - 2.0 * eps, epsilon = 1e-10);
        }
    }

    #[test]
    fn delta_limits() {
        for n in 2..=6 {
            let mut prev = 1.0;
            for k in 1..500 {
                let eps = k as f64 / 1000.0;
                let d = delta_cap(eps, n).unwrap();
                assert!(d <= prev + 1e-15, "n = {n}, eps = {eps}");
                prev = d;
            }
            assert!(delta_cap(1e-9, n).unwrap() > 0.99);
            assert!(delta_cap(0.5 - 1e-12, n).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn cap_params_regimes() {
        let c = CapParams::new(0.25, 2).unwrap();
        assert!(!c.saturated);
        assert_abs_diff_eq!(c.chord, (2.0 - 2.0 * (PI / 4.0).cos()).sqrt(), epsilon = 1e-12);
        let s = CapParams::new(0.7, 2).unwrap();
        assert!(s.saturated);
        assert_eq!(s.delta, 0.0);
        assert_eq!(s.chord, 2f64.sqrt());
    }

    #[test]
    fn eps_cover_examples() {
        // Exact references from 40-digit arithmetic, plus rounded values at
        // their rounding precision.
        assert_abs_diff_eq!(eps_cover(0.95, 2.0, 3, 1000), 0.008_744_879_129_342_54, epsilon = 1e-15);
        assert_abs_diff_eq!(eps_cover(0.95, 2.0, 3, 1000), 0.0087448, epsilon = 1e-7);
        assert_abs_diff_eq!(eps_cover(0.0, 2.0, 3, 1), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eps_cover(0.95, 125.0, 3, 375), 1.452174398034232, epsilon = 1e-13);
        assert_abs_diff_eq!(eps_cover(0.95, 125.0, 3, 375), 1.45218, epsilon = 1e-5);
    }

    #[test]
    fn eps_cover_matches_quadratic_formula() {
        // m^l (1 − (2(1−β)/(n(n+1)+2))^{1/N}), written out literally.
        for n in 2..6usize {
            for &(beta, ml, big_n) in &[(0.95, 2.0, 100usize), (0.5, 8.0, 1000), (0.99, 1.0, 17)] {
                let literal = ml * (1.0 - (2.0 * (1.0 - beta) / ((n * (n + 1) + 2) as f64)).powf(1.0 / big_n as f64));
                let got = eps_cover(beta, ml, n * (n + 1) / 2, big_n);
                assert_abs_diff_eq!(got, literal, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn eps_cover_monotone() {
        let mut prev = f64::INFINITY;
        for big_n in [10, 100, 1000, 10_000] {
            let e = eps_cover(0.95, 2.0, 3, big_n);
            assert!(e < prev);
            prev = e;
        }
        assert!(eps_cover(0.95, 4.0, 3, 100) > eps_cover(0.95, 2.0, 3, 100));
    }

    #[test]
    fn beta_from_eps_examples() {
        assert_eq!(beta_from_eps(2.0, 2.0, 3, 10).unwrap().value, 1.0);
        assert_abs_diff_eq!(beta_from_eps(0.5, 2.0, 3, 10).unwrap().value, 1.0 - 4.0 * 0.75f64.powi(10), epsilon = 1e-14);
        let eps = eps_cover(0.95, 2.0, 3, 1000);
        assert_abs_diff_eq!(beta_from_eps(eps, 2.0, 3, 1000).unwrap().raw, 0.95, epsilon = 1e-9);
        let vac = beta_from_eps(0.01, 2.0, 3, 2).unwrap();
        assert!(vac.vacuous && vac.value == 0.0 && vac.raw < 0.0);
        assert!(beta_from_eps(3.0, 2.0, 3, 10).is_err());
    }

    #[test]
    fn eps_one_examples() {
        assert_eq!(eps_one(0.0, 5, 3, 375), 0.0);
        assert_abs_diff_eq!(eps_one(0.95, 5, 3, 375), 0.49730, epsilon = 1e-5);
        assert_abs_diff_eq!(eps_one(0.95, 2, 1, 1000), 0.0029912, epsilon = 1e-7);
    }

    #[test]
    fn min_samples_examples() {
        assert_eq!(min_samples_finite(0.95, 5, 3).unwrap(), 373);
        assert_eq!(min_samples_finite(0.95, 2, 1).unwrap(), 5);
        assert_eq!(min_samples_finite(1e-12, 5, 3).unwrap(), 1);
        assert_eq!(min_samples_finite(0.95, 1, 4).unwrap(), 1);
    }

    #[test]
    fn min_samples_is_threshold() {
        for &(b1, m, l) in &[(0.95, 5, 3), (0.99, 3, 2), (0.5, 2, 5), (0.9, 7, 1)] {
            let n = min_samples_finite(b1, m, l).unwrap();
            assert!(eps_one(b1, m, l, n) < 0.5);
            if n > 1 {
                assert!(eps_one(b1, m, l, n - 1) >= 0.5);
            }
        }
    }
}
