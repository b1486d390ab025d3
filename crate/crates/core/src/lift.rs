//! Degree-`d` lifts of vectors and matrices.
//!
//! The lift maps `x ∈ Rⁿ` to the weighted monomial vector
//! `x^{[d]}_α = sqrt(mult(α)) · x^α`, one entry per exponent `α` with `|α| = d`,
//! where `mult(α) = d!/(α₁!⋯αₙ!)`. With these weights `‖x^{[d]}‖ = ‖x‖^d`, and a
//! homogeneous SOS form of degree `2d` is `(x^{[d]})ᵀ P x^{[d]}`.
//!
//! Exponents are kept in graded lexicographic order: for a fixed degree,
//! descending lexicographic in `(α₁, …, αₙ)`, e.g. `(2,0), (1,1), (0,2)`. Every
//! lift operation goes through a [`LiftBasis`] so they all share that order.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a degree-`d` monomial with its multinomial weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndex {
    alpha: Vec<u32>,
    coeff: f64,
}

impl MultiIndex {
    fn new(alpha: Vec<u32>) -> Self {
        let coeff = multinomial(&alpha);
        Self { alpha, coeff }
    }

    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }

    pub fn degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    /// Multinomial coefficient `d! / (α₁!⋯αₙ!)`.
    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// `x^α`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

fn multinomial(alpha: &[u32]) -> f64 {
    // Built up as a running product of binomials so intermediate values stay exact.
    let mut total = 0u64;
    let mut acc = 1u64;
    for &a in alpha {
        for k in 1..=a as u64 {
            total += 1;
            acc = acc * total / k;
        }
    }
    acc as f64
}

/// `D = C(n+d-1, d)`, the number of degree-`d` monomials in `n` variables.
pub fn num_monomials(n: usize, d: usize) -> usize {
    let mut acc: u128 = 1;
    for k in 1..=d as u128 {
        acc = acc * (n as u128 + k - 1) / k;
    }
    acc as usize
}

/// All exponents of degree `d` in `n` variables, graded lexicographic order.
pub fn multi_index_set(n: usize, d: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "multi-index set needs n ≥ 1 and d ≥ 1 (got n = {n}, d = {d})"
        )));
    }
    fn rec(slot: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        let n = cur.len();
        if slot == n - 1 {
            cur[slot] = left;
            out.push(MultiIndex::new(cur.clone()));
            return;
        }
        for a in (0..=left).rev() {
            cur[slot] = a;
            rec(slot + 1, left - a, cur, out);
        }
        cur[slot] = 0;
    }
    let mut out = Vec::with_capacity(num_monomials(n, d));
    rec(0, d as u32, &mut vec![0; n], &mut out);
    Ok(out)
}

/// A lifted vector together with the lift it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedVector {
    pub n: usize,
    pub d: usize,
    pub entries: Vec<f64>,
}

impl LiftedVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Precomputed monomial basis for a fixed `(n, d)`.
#[derive(Debug, Clone)]
pub struct LiftBasis {
    n: usize,
    d: usize,
    indices: Vec<MultiIndex>,
    sqrt_coeff: Vec<f64>,
}

impl LiftBasis {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        let indices = multi_index_set(n, d)?;
        let sqrt_coeff = indices.iter().map(|a| a.coeff().sqrt()).collect();
        Ok(Self {
            n,
            d,
            indices,
            sqrt_coeff,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Lifted dimension `D`.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Lift without input validation; `x.len()` must equal `n`.
    pub(crate) fn lift_unchecked(&self, x: &[f64]) -> Vec<f64> {
        if self.d == 1 {
            return x.to_vec();
        }
        self.indices
            .iter()
            .zip(&self.sqrt_coeff)
            .map(|(alpha, w)| w * alpha.monomial(x))
            .collect()
    }

    pub fn lift_vector(&self, x: &[f64]) -> Result<LiftedVector> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "vector has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lifted vector"));
        }
        Ok(LiftedVector {
            n: self.n,
            d: self.d,
            entries: self.lift_unchecked(x),
        })
    }

    /// Row index (into the basis) of every tuple `(i₁,…,i_d) ∈ {0..n}^d`,
    /// tuples enumerated in Kronecker order (first index most significant).
    fn tuple_rows(&self) -> Vec<usize> {
        let lookup: HashMap<&[u32], usize> = self
            .indices
            .iter()
            .enumerate()
            .map(|(k, a)| (a.alpha(), k))
            .collect();
        let total = self.n.pow(self.d as u32);
        let mut rows = Vec::with_capacity(total);
        let mut counts = vec![0u32; self.n];
        for t in 0..total {
            counts.iter_mut().for_each(|c| *c = 0);
            let mut rem = t;
            for _ in 0..self.d {
                counts[rem % self.n] += 1;
                rem /= self.n;
            }
            rows.push(lookup[counts.as_slice()]);
        }
        rows
    }

    /// The `D × n^d` matrix `C_d` with `x^{[d]} = C_d x^{⊗d}`: row `α` holds
    /// `1/sqrt(mult(α))` in each column whose index tuple has exponent `α`.
    pub fn projection(&self) -> DMatrix<f64> {
        let rows = self.tuple_rows();
        let mut c = DMatrix::zeros(self.dim(), rows.len());
        for (col, &row) in rows.iter().enumerate() {
            c[(row, col)] = 1.0 / self.sqrt_coeff[row];
        }
        c
    }

    /// `A^{[d]} = C_d A^{⊗d} C_dᵀ`, the matrix of `x^{[d]} ↦ (Ax)^{[d]}`.
    pub fn lift_matrix(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::invalid(format!(
                "matrix is {}×{}, expected {n}×{n}",
                a.nrows(),
                a.ncols(),
                n = self.n
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lifted matrix"));
        }
        if self.d == 1 {
            return Ok(a.clone());
        }
        let rows = self.tuple_rows();
        let total = rows.len();
        let digits: Vec<Vec<usize>> = (0..total)
            .map(|t| {
                let mut out = vec![0; self.d];
                let mut rem = t;
                for k in (0..self.d).rev() {
                    out[k] = rem % self.n;
                    rem /= self.n;
                }
                out
            })
            .collect();
        let dim = self.dim();
        let mut lifted = DMatrix::zeros(dim, dim);
        // Entry (s, t) of A^{⊗d} is ∏ₖ A[sₖ, tₖ].
        for (s, ds) in digits.iter().enumerate() {
            for (t, dt) in digits.iter().enumerate() {
                let prod: f64 = ds.iter().zip(dt).map(|(&i, &j)| a[(i, j)]).product();
                if prod != 0.0 {
                    let (ra, rb) = (rows[s], rows[t]);
                    lifted[(ra, rb)] += prod / (self.sqrt_coeff[ra] * self.sqrt_coeff[rb]);
                }
            }
        }
        Ok(lifted)
    }
}

/// `x^{[d]}`; see [`LiftBasis::lift_vector`].
pub fn d_lift_vector(x: &[f64], d: usize) -> Result<LiftedVector> {
    LiftBasis::new(x.len(), d)?.lift_vector(x)
}

/// `A^{[d]}`; see [`LiftBasis::lift_matrix`].
pub fn d_lift_matrix(a: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    LiftBasis::new(a.nrows(), d)?.lift_matrix(a)
}

/// `x^{⊗k} = x ⊗ x^{⊗(k-1)}`.
pub fn kron_power(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("Kronecker power needs k ≥ 1"));
    }
    let mut acc = x.to_vec();
    for _ in 1..k {
        acc = x
            .iter()
            .flat_map(|&xi| acc.iter().map(move |&r| xi * r))
            .collect();
    }
    Ok(acc)
}
