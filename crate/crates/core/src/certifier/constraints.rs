//! Sampled decrease constraints `vᵢᵀ P vᵢ ≤ γ^{2dl} uᵢᵀ P uᵢ` with lifted
//! endpoints `uᵢ = x0^{[d]}`, `vᵢ = xl^{[d]}`, written as linear forms in the
//! packed entries of `P`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lift::LiftBasis;
use crate::sampling::EndpointSet;
use crate::symmetric::{packed_len, SymMatrix};

/// Largest lifted dimension accepted by the solvers.
pub const MAX_LIFT_DIM: usize = 20;

/// Coefficients of `P ↦ wᵀ P w` on the packed upper triangle.
pub fn quad_coeffs(w: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(packed_len(w.len()));
    for i in 0..w.len() {
        out.push(w[i] * w[i]);
        for j in i + 1..w.len() {
            out.push(2.0 * w[i] * w[j]);
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lifted endpoint pairs of an observation set, in packed-coefficient form.
#[derive(Debug, Clone)]
pub struct LiftedPairs {
    n: usize,
    d: usize,
    l: usize,
    dim: usize,
    np: usize,
    /// Row `i` of length `np`: coefficients of `vᵢᵀ P vᵢ`.
    qv: Vec<f64>,
    /// Row `i`: coefficients of `uᵢᵀ P uᵢ`.
    qu: Vec<f64>,
    v_sq: Vec<f64>,
    u_sq: Vec<f64>,
}

impl LiftedPairs {
    pub fn new(obs: &EndpointSet, d: usize) -> Result<Self> {
        let basis = LiftBasis::new(obs.dim(), d)?;
        let dim = basis.dim();
        if dim > MAX_LIFT_DIM {
            return Err(Error::invalid(format!(
                "lifted dimension {dim} exceeds the supported maximum {MAX_LIFT_DIM}"
            )));
        }
        let np = packed_len(dim);
        let mut pairs = Self {
            n: obs.dim(),
            d,
            l: obs.trace_len(),
            dim,
            np,
            qv: Vec::with_capacity(obs.len() * np),
            qu: Vec::with_capacity(obs.len() * np),
            v_sq: Vec::with_capacity(obs.len()),
            u_sq: Vec::with_capacity(obs.len()),
        };
        for (x0, xl) in obs.pairs() {
            let u = basis.lift_unchecked(x0);
            let v = basis.lift_unchecked(xl);
            pairs.u_sq.push(dot(&u, &u));
            pairs.v_sq.push(dot(&v, &v));
            pairs.qu.extend(quad_coeffs(&u));
            pairs.qv.extend(quad_coeffs(&v));
        }
        Ok(pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn trace_len(&self) -> usize {
        self.l
    }

    /// Lifted dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.v_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_sq.is_empty()
    }

    /// `‖vᵢ‖²`.
    pub fn image_sq(&self, i: usize) -> f64 {
        self.v_sq[i]
    }

    /// `‖uᵢ‖²`.
    pub fn source_sq(&self, i: usize) -> f64 {
        self.u_sq[i]
    }

    pub(crate) fn qv(&self, i: usize) -> &[f64] {
        &self.qv[i * self.np..(i + 1) * self.np]
    }

    pub(crate) fn qu(&self, i: usize) -> &[f64] {
        &self.qu[i * self.np..(i + 1) * self.np]
    }

    /// `γ^{2dl}`.
    pub fn rate(&self, gamma: f64) -> f64 {
        gamma.powi((2 * self.d * self.l) as i32)
    }
}

/// Decrease constraints at a fixed `γ`.
#[derive(Debug, Clone)]
pub struct FeasibilitySystem {
    pairs: Arc<LiftedPairs>,
    gamma: f64,
    rate: f64,
}

impl FeasibilitySystem {
    pub fn new(pairs: Arc<LiftedPairs>, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be finite and non-negative, got {gamma}")));
        }
        let rate = pairs.rate(gamma);
        Ok(Self { pairs, gamma, rate })
    }

    pub fn pairs(&self) -> &Arc<LiftedPairs> {
        &self.pairs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `γ^{2dl}`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.pairs.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Packed coefficients of constraint `i`: `⟨row, svec P⟩ ≤ 0`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.pairs
            .qv(i)
            .iter()
            .zip(self.pairs.qu(i))
            .map(|(a, b)| a - self.rate * b)
            .collect()
    }

    /// `vᵢᵀ P vᵢ − γ^{2dl} uᵢᵀ P uᵢ`.
    pub fn violation(&self, i: usize, p: &SymMatrix) -> f64 {
        dot(self.pairs.qv(i), p.packed()) - self.rate * dot(self.pairs.qu(i), p.packed())
    }

    /// Whether every constraint holds up to `rel_slack` times the size of
    /// its two sides.
    pub fn satisfied_by(&self, p: &SymMatrix, rel_slack: f64) -> bool {
        (0..self.len()).all(|i| {
            let lhs = dot(self.pairs.qv(i), p.packed());
            let rhs = self.rate * dot(self.pairs.qu(i), p.packed());
            lhs - rhs <= rel_slack * (lhs.abs() + rhs.abs())
        })
    }
}

/// Builds the decrease constraints of `obs` at degree `d` and rate `γ`.
pub fn assemble_constraints(obs: &EndpointSet, d: usize, gamma: f64) -> Result<FeasibilitySystem> {
    FeasibilitySystem::new(Arc::new(LiftedPairs::new(obs, d)?), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(x0: Vec<f64>, xl: Vec<f64>) -> EndpointSet {
        EndpointSet::new(x0.len(), 1, vec![(x0, xl)]).unwrap()
    }

    #[test]
    fn worked_example_row() {
        let sys = assemble_constraints(&one(vec![1.0, 0.0], vec![1.0, 1.0]), 1, 1.0).unwrap();
        assert_eq!(sys.row(0), vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_image_is_vacuous() {
        let sys = assemble_constraints(&one(vec![0.0, 1.0], vec![0.0, 0.0]), 1, 0.7).unwrap();
        let row = sys.row(0);
        assert_eq!(&row[..2], &[0.0, 0.0]);
        assert!((row[2] + 0.49).abs() < 1e-15);
        assert!(sys.satisfied_by(&SymMatrix::identity(2), 0.0));
    }

    #[test]
    fn degree_two_size() {
        let sys = assemble_constraints(&one(vec![1.0, 0.0], vec![1.0, 1.0]), 2, 1.0).unwrap();
        assert_eq!(sys.dim(), 3);
        assert_eq!(sys.row(0).len(), 6);
    }

    #[test]
    fn quad_coeffs_match_quad_form() {
        let w = [0.3, -1.0, 2.5];
        let p = SymMatrix::from_fn(3, |i, j| 1.0 + i as f64 * 0.5 - j as f64 * 0.25);
        assert!((dot(&quad_coeffs(&w), p.packed()) - p.quad_form(&w)).abs() < 1e-12);
    }
}
