//! Packed real symmetric matrices.
//!
//! Only the upper triangle is stored (row-major), so symmetry holds by
//! construction. The same packed order is used as the variable ordering of the
//! Lyapunov matrix inside the LMI solvers.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real symmetric matrix stored as its packed upper triangle.
#[derive(Clone, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
    #[serde(skip)]
    extremes: OnceLock<(f64, f64)>,
}

/// Spectral summary of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetrics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `sqrt(λmax / λmin)`, `+∞` when `λmin ≤ 0`.
    pub kappa: f64,
    /// Largest singular value, `max |λ|`.
    pub spectral_norm: f64,
}

/// Number of packed entries for a `dim × dim` symmetric matrix.
pub const fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Position of `(i, j)`, `i ≤ j`, in the packed upper triangle.
#[inline]
pub(crate) fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < dim);
    i * (2 * dim - i + 1) / 2 + (j - i)
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self::from_packed(dim, vec![0.0; packed_len(dim)])
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds from a function evaluated on the upper triangle (`i ≤ j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self::from_packed(dim, upper)
    }

    /// Wraps a packed upper triangle.
    ///
    /// # Panics
    /// If `upper.len() != dim (dim + 1) / 2`.
    pub fn from_packed(dim: usize, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), packed_len(dim), "packed length mismatch");
        Self {
            dim,
            upper,
            extremes: OnceLock::new(),
        }
    }

    /// Reads a dense square matrix, rejecting asymmetry beyond `tol`
    /// (relative to the largest entry). The stored value is the average of the
    /// two triangles.
    pub fn from_dense(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("matrix is not square"));
        }
        let scale = m.amax().max(1.0);
        let dim = m.nrows();
        for i in 0..dim {
            for j in i + 1..dim {
                if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.upper[packed_index(self.dim, i, j)]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_packed(self.dim, self.upper.iter().map(|v| v * factor).collect())
    }

    /// `xᵀ P x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.dim {
            acc += self.upper[k] * x[i] * x[i];
            k += 1;
            for j in i + 1..self.dim {
                acc += 2.0 * self.upper[k] * x[i] * x[j];
                k += 1;
            }
        }
        acc
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = self.to_dense().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `(λmin, λmax)`, computed once and cached.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        *self.extremes.get_or_init(|| {
            let ev = self.eigenvalues();
            match (ev.first(), ev.last()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => (0.0, 0.0),
            }
        })
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen_extremes().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigen_extremes().1
    }

    pub fn metrics(&self) -> MatrixMetrics {
        matrix_metrics(self)
    }
}

impl PartialEq for SymMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.upper == other.upper
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymMatrix")
            .field("dim", &self.dim)
            .field("rows", &self.to_rows())
            .finish()
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(p: SymMatrix) -> Self {
        p.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix rows have inconsistent lengths"));
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        SymMatrix::from_dense(&m, 1e-12)
    }
}

/// Extreme eigenvalues, condition number `κ = sqrt(λmax/λmin)` and spectral
/// norm of `p`.
pub fn matrix_metrics(p: &SymMatrix) -> MatrixMetrics {
    let (lambda_min, lambda_max) = p.eigen_extremes();
    let kappa = if lambda_min > 0.0 {
        (lambda_max / lambda_min).sqrt()
    } else {
        f64::INFINITY
    };
    MatrixMetrics {
        lambda_min,
        lambda_max,
        kappa,
        spectral_norm: lambda_max.abs().max(lambda_min.abs()),
    }
}

/// `‖x‖_P = sqrt(xᵀ P x)` for positive semidefinite `P`.
///
/// Round-off can make the quadratic form slightly negative; values down to
/// `-1e-12` are clamped to zero, anything below is an error.
pub fn ellipsoidal_norm(p: &SymMatrix, x: &[f64]) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::invalid(format!(
            "vector length {} does not match matrix dimension {}",
            x.len(),
            p.dim()
        )));
    }
    let q = p.quad_form(x);
    if q >= 0.0 {
        Ok(q.sqrt())
    } else if q >= -1e-12 {
        Ok(0.0)
    } else {
        Err(Error::invalid(format!(
            "quadratic form is negative ({q:e}); matrix is not positive semidefinite"
        )))
    }
}
