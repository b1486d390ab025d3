//! Probabilistic JSR upper bounds from the sampled optimum.
//!
//! With `γ` the certified sampled rate, `κ` the condition number of its
//! Lyapunov matrix and `λ*` the largest observed gain, the bound is
//!
//! ```text
//! ρ ≤ (γ^{dl} + (γ^{dl} + A^d) · f(d, Δ) · κ)^{1/(dl)}
//! ```
//!
//! with `A = λ* / δ(ε₁)^{1/l}` and `f(1, Δ) = Δ`. It holds with probability at
//! least `β + β₁ − 1`.

use serde::{Deserialize, Serialize};

use crate::cap::{chord_bound, delta_cap, eps_cover, eps_one, ConfidenceBudget};
use crate::certifier::{solve_gamma, SolveOptions};
use crate::error::{Error, Result};
use crate::lift::num_monomials;
use crate::sampling::{EndpointSet, Provenance};
use crate::symmetric::SymMatrix;

/// Serde for reals that may be `+∞`, written as the string `"inf"`.
pub mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// Gain bound `A = λ* / δ(ε₁)^{1/l}`; `+∞` when `δ(ε₁) = 0`. `ε₁ = 0`
/// (no confidence spent) leaves `λ*` unchanged.
pub fn bound_b(lambda_star: f64, eps1: f64, l: usize, n: usize) -> Result<f64> {
    if !(lambda_star >= 0.0) {
        return Err(Error::invalid("λ* must be non-negative"));
    }
    let delta = if eps1 == 0.0 { 1.0 } else { delta_cap(eps1, n)? };
    Ok(gain_from_delta(lambda_star, delta, l))
}

fn gain_from_delta(lambda_star: f64, delta: f64, l: usize) -> f64 {
    if delta == 0.0 {
        f64::INFINITY
    } else {
        lambda_star / delta.powf(1.0 / l as f64)
    }
}

/// `f(d, Δ) = √D ((1+Δ)^d − 1 − (1 − 1/√D) Δ^d)`.
pub fn f_correction(d: usize, chord: f64, big_d: usize) -> f64 {
    let sd = (big_d as f64).sqrt();
    let d = d as i32;
    sd * ((1.0 + chord).powi(d) - 1.0 - (1.0 - 1.0 / sd) * chord.powi(d))
}

/// Quadratic bound `(γ^l + (γ^l + A) Δ κ)^{1/l}`.
pub fn quadratic_bound(gamma: f64, kappa: f64, a: f64, chord: f64, l: usize) -> f64 {
    let gl = gamma.powi(l as i32);
    (gl + (gl + a) * chord * kappa).powf(1.0 / l as f64)
}

/// SOS bound `(γ^{dl} + (γ^{dl} + A^d) f κ)^{1/(dl)}`.
pub fn sos_bound(gamma: f64, kappa: f64, a: f64, f: f64, d: usize, l: usize) -> f64 {
    let dl = (d * l) as i32;
    let g = gamma.powi(dl);
    (g + (g + a.powi(d as i32)) * f * kappa).powf(1.0 / dl as f64)
}

/// Every intermediate of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `D`.
    pub lift_dim: usize,
    pub eps: f64,
    pub eps1: f64,
    pub delta_eps: f64,
    pub delta_eps1: f64,
    #[serde(rename = "Delta")]
    pub chord: f64,
    pub f_value: f64,
    #[serde(with = "extended_real")]
    pub a_value: f64,
    #[serde(with = "extended_real")]
    pub bound: f64,
    pub confidence: f64,
    pub finite: bool,
}

/// Minimum `N` for a degree-`d` certificate in dimension `n`: `D(D+1)/2 + 1`.
pub fn min_samples_for_degree(n: usize, d: usize) -> usize {
    let big_d = num_monomials(n, d);
    big_d * (big_d + 1) / 2 + 1
}

/// Evaluates the bound for `(γ, κ, λ*)` under `budget`.
pub fn jsr_upper_bound(gamma: f64, kappa: f64, lambda_star: f64, budget: &ConfidenceBudget) -> Result<BoundTerms> {
    budget.validate()?;
    if !(gamma >= 0.0) || !(kappa >= 1.0 - 1e-12) || !(lambda_star >= 0.0) {
        return Err(Error::invalid(format!(
            "need γ ≥ 0, κ ≥ 1, λ* ≥ 0 (got {gamma}, {kappa}, {lambda_star})"
        )));
    }
    let big_d = num_monomials(budget.n, budget.d);
    let d1 = big_d * (big_d + 1) / 2;
    let required = d1 + 1;
    if budget.n_samples < required {
        return Err(Error::InsufficientSamples {
            got: budget.n_samples,
            required,
        });
    }
    let eps = eps_cover(budget.beta, budget.ml(), d1, budget.n_samples);
    let eps1 = eps_one(budget.beta1, budget.m, budget.l, budget.n_samples);
    let delta_eps = delta_cap(eps, budget.n)?;
    let delta_eps1 = if eps1 == 0.0 { 1.0 } else { delta_cap(eps1, budget.n)? };
    let chord = chord_bound(delta_eps);
    let a_value = gain_from_delta(lambda_star, delta_eps1, budget.l);
    let f_value = f_correction(budget.d, chord, big_d);
    let bound = if a_value.is_infinite() {
        f64::INFINITY
    } else {
        sos_bound(gamma, kappa, a_value, f_value, budget.d, budget.l)
    };
    Ok(BoundTerms {
        lift_dim: big_d,
        eps,
        eps1,
        delta_eps,
        delta_eps1,
        chord,
        f_value,
        a_value,
        bound,
        confidence: (budget.beta + budget.beta1 - 1.0).max(0.0),
        finite: delta_eps1 > 0.0,
    })
}

/// Which degenerate regimes applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// `ε ≥ 1/2`, so `δ(ε) = 0` and `Δ = √2`.
    pub eps_saturated: bool,
    /// `ε₁ ≥ 1/2`: the gain bound, hence the JSR bound, is `+∞`.
    pub eps1_saturated: bool,
    /// `β + β₁ < 1`: the stated confidence is 0.
    pub confidence_vacuous: bool,
    /// `λmax(P) ≤ C` limited the solve.
    pub c_bound_active: bool,
}

/// Where the data and the solver settings came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub source: Provenance,
    pub options: SolveOptions,
}

/// Full certificate: inputs, every intermediate quantity and the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub d: usize,
    pub l: usize,
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "D")]
    pub lift_dim: usize,
    /// Upper end of the bisection bracket.
    pub gamma_star: f64,
    /// Rate at which `P` was verified, `γ*(1 + tie-break slack)`; used in the bound.
    pub gamma_certified: f64,
    #[serde(with = "extended_real")]
    pub kappa: f64,
    pub lambda_star: f64,
    pub beta: f64,
    pub beta1: f64,
    pub eps: f64,
    pub eps1: f64,
    pub delta_eps: f64,
    pub delta_eps1: f64,
    #[serde(rename = "Delta")]
    pub chord: f64,
    pub f_value: f64,
    #[serde(rename = "A_value", with = "extended_real")]
    pub a_value: f64,
    #[serde(with = "extended_real")]
    pub jsr_upper_bound: f64,
    pub confidence: f64,
    pub finite: bool,
    pub regimes: RegimeFlags,
    pub provenance: ReportProvenance,
    #[serde(rename = "P")]
    pub p: SymMatrix,
}

/// Budget matching `obs` for a degree-`d` certificate.
pub fn budget_for(obs: &EndpointSet, d: usize, m: usize, beta: f64, beta1: f64) -> ConfidenceBudget {
    ConfidenceBudget {
        beta,
        beta1,
        m,
        l: obs.trace_len(),
        n_samples: obs.len(),
        n: obs.dim(),
        d,
    }
}

/// Runs the whole pipeline on `obs`: sampled program, tie-break and bound.
pub fn certify(
    obs: &EndpointSet,
    budget: &ConfidenceBudget,
    opts: &SolveOptions,
    source: Provenance,
) -> Result<CertificateReport> {
    budget.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if budget.n != obs.dim() || budget.l != obs.trace_len() || budget.n_samples != obs.len() {
        return Err(Error::invalid("confidence budget does not match the observation set"));
    }
    let required = min_samples_for_degree(budget.n, budget.d);
    if budget.n_samples < required {
        return Err(Error::InsufficientSamples {
            got: budget.n_samples,
            required,
        });
    }
    let sol = solve_gamma(obs, budget.d, opts)?;
    let cand = &sol.candidate;
    let terms = jsr_upper_bound(cand.gamma, cand.kappa, sol.lambda_star, budget)?;
    Ok(CertificateReport {
        d: budget.d,
        l: budget.l,
        n_samples: budget.n_samples,
        m: budget.m,
        n: budget.n,
        lift_dim: terms.lift_dim,
        gamma_star: sol.gamma_star,
        gamma_certified: cand.gamma,
        kappa: cand.kappa,
        lambda_star: sol.lambda_star,
        beta: budget.beta,
        beta1: budget.beta1,
        eps: terms.eps,
        eps1: terms.eps1,
        delta_eps: terms.delta_eps,
        delta_eps1: terms.delta_eps1,
        chord: terms.chord,
        f_value: terms.f_value,
        a_value: terms.a_value,
        jsr_upper_bound: terms.bound,
        confidence: terms.confidence,
        finite: terms.finite,
        regimes: RegimeFlags {
            eps_saturated: terms.eps >= 0.5,
            eps1_saturated: terms.eps1 >= 0.5,
            confidence_vacuous: budget.beta + budget.beta1 < 1.0,
            c_bound_active: cand.c_bound_active,
        },
        provenance: ReportProvenance {
            source,
            options: *opts,
        },
        p: cand.p.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn gain_bound_examples() {
        assert_relative_eq!(gain_from_delta(1.4, 0.5, 1), 2.8);
        assert!(gain_from_delta(1.0, 0.0, 2).is_infinite());
        let eps1 = eps_one(0.95, 2, 1, 1000);
        assert_relative_eq!(eps1, 0.0029912, max_relative = 1e-4);
        let b = bound_b(SQRT_2, eps1, 1, 2).unwrap();
        assert_relative_eq!(b, SQRT_2 / (PI * eps1).cos(), max_relative = 1e-12);
        assert_relative_eq!(b, 1.414275, max_relative = 1e-6);
        assert!(bound_b(1.0, 0.6, 1, 2).unwrap().is_infinite());
        assert_eq!(bound_b(1.3, 0.0, 1, 2).unwrap(), 1.3);
    }

    #[test]
    fn f_examples() {
        for &c in &[0.0, 0.1, 0.7, SQRT_2] {
            assert_relative_eq!(f_correction(1, c, 5), c, max_relative = 1e-14, epsilon = 1e-300);
        }
        let expect = 3f64.sqrt() * (0.21 - (1.0 - 1.0 / 3f64.sqrt()) * 0.01);
        assert_relative_eq!(f_correction(2, 0.1, 3), expect, max_relative = 1e-14);
        assert_abs_diff_eq!(f_correction(2, 0.1, 3), 0.356409, epsilon = 2e-6);
        assert_eq!(f_correction(3, 0.0, 10), 0.0);
    }

    #[test]
    fn bound_examples() {
        let q = quadratic_bound(1.0, SQRT_2, SQRT_2, SQRT_2, 1);
        assert_relative_eq!(q, 1.0 + (1.0 + SQRT_2) * 2.0, max_relative = 1e-14);
        assert_relative_eq!(q, 5.82843, max_relative = 1e-6);
        assert_relative_eq!(sos_bound(1.0, SQRT_2, SQRT_2, SQRT_2, 1, 1), q, max_relative = 1e-14);
    }

    #[test]
    fn confidence_and_precondition() {
        let budget = ConfidenceBudget {
            beta: 0.95,
            beta1: 0.95,
            m: 2,
            l: 1,
            n_samples: 1000,
            n: 2,
            d: 1,
        };
        let t = jsr_upper_bound(1.2, 1.1, 1.5, &budget).unwrap();
        assert_relative_eq!(t.confidence, 0.9, max_relative = 1e-12);
        assert!(t.finite && t.bound >= 1.2);
        let small = ConfidenceBudget { n_samples: 6, d: 2, ..budget };
        match jsr_upper_bound(1.0, 1.0, 1.0, &small) {
            Err(Error::InsufficientSamples { required, .. }) => assert_eq!(required, 7),
            other => panic!("{other:?}"),
        }
        let vac = ConfidenceBudget { beta: 0.3, beta1: 0.2, ..budget };
        assert_eq!(jsr_upper_bound(1.0, 1.0, 1.0, &vac).unwrap().confidence, 0.0);
    }

    #[test]
    fn infinite_bound_serializes() {
        let budget = ConfidenceBudget {
            beta: 0.95,
            beta1: 0.95,
            m: 5,
            l: 3,
            n_samples: 300,
            n: 2,
            d: 1,
        };
        let t = jsr_upper_bound(1.0, 1.0, 1.0, &budget).unwrap();
        assert!(!t.finite && t.bound.is_infinite());
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"bound\":\"inf\""), "{s}");
        let back: BoundTerms = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
