//! Log-barrier path following for small LMI problems with many scalar
//! constraints.
//!
//! Variables are `y = (svec P, extras…)` where the first `packed_len(dim)`
//! entries are the packed upper triangle of a symmetric `dim × dim` matrix
//! `P`. Constraints are
//!
//! * linear rows `aᵢᵀ y + bᵢ > 0`, stored column-wise in a `k × m` matrix;
//! * matrix inequalities of the restricted form
//!   `F(y) = σ·P + (c·y_e + s)·I ≻ 0`.
//!
//! This is all the sampled Lyapunov programs need, and it lets the LMI
//! gradient and Hessian be written entry-wise instead of through dense
//! basis matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symmetric::packed_len;

const MAX_CENTERING_STEPS: usize = 50;

/// `F(y) = sign·P + (coef·y[extra] + shift)·I`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShiftedLmi {
    pub sign: f64,
    pub extra: Option<(usize, f64)>,
    pub shift: f64,
}

pub(crate) struct BarrierProblem {
    dim: usize,
    /// Minimize `cᵀy`.
    c: DVector<f64>,
    /// Column `i` holds `aᵢ`.
    rows: DMatrix<f64>,
    offsets: DVector<f64>,
    lmis: Vec<ShiftedLmi>,
    /// `(i, j)` of every packed entry.
    pairs: Vec<(usize, usize)>,
}

/// What the observer wants after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Control {
    Continue,
    Stop,
}

/// Notifications passed to the observer.
pub(crate) enum Event<'a> {
    /// After every accepted Newton step.
    Step(&'a DVector<f64>),
    /// After centering at barrier weight `t`; `gap` bounds the suboptimality
    /// of the current point.
    Centered { y: &'a DVector<f64>, gap: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub t0: f64,
    pub mu: f64,
    pub max_newton: usize,
}

struct Point {
    slacks: DVector<f64>,
    /// Inverse and log-determinant of each LMI.
    lmi: Vec<(DMatrix<f64>, f64)>,
}

impl BarrierProblem {
    pub fn new(
        dim: usize,
        extras: usize,
        c: DVector<f64>,
        rows: DMatrix<f64>,
        offsets: DVector<f64>,
        lmis: Vec<ShiftedLmi>,
    ) -> Self {
        let np = packed_len(dim);
        let k = np + extras;
        assert_eq!(c.len(), k);
        assert_eq!(rows.nrows(), k);
        assert_eq!(rows.ncols(), offsets.len());
        let mut pairs = Vec::with_capacity(np);
        for i in 0..dim {
            for j in i..dim {
                pairs.push((i, j));
            }
        }
        Self {
            dim,
            c,
            rows,
            offsets,
            lmis,
            pairs,
        }
    }

    /// Number of barrier terms, which bounds the duality gap at `t` by `ν/t`.
    pub fn barrier_degree(&self) -> f64 {
        (self.rows.ncols() + self.lmis.len() * self.dim) as f64
    }

    fn lmi_matrix(&self, lmi: &ShiftedLmi, y: &DVector<f64>) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.dim, self.dim);
        for (a, &(i, j)) in self.pairs.iter().enumerate() {
            let v = lmi.sign * y[a];
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
        let diag = lmi.extra.map_or(0.0, |(e, coef)| coef * y[e]) + lmi.shift;
        for i in 0..self.dim {
            f[(i, i)] += diag;
        }
        f
    }

    /// Slacks and LMI factorizations, or `None` outside the interior.
    fn evaluate(&self, y: &DVector<f64>) -> Option<Point> {
        let slacks = self.rows.tr_mul(y) + &self.offsets;
        if slacks.iter().any(|&r| r.is_nan() || r <= 0.0) {
            return None;
        }
        let mut lmi = Vec::with_capacity(self.lmis.len());
        for l in &self.lmis {
            let chol = self.lmi_matrix(l, y).cholesky()?;
            let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            if !logdet.is_finite() {
                return None;
            }
            lmi.push((chol.inverse(), logdet));
        }
        Some(Point { slacks, lmi })
    }

    fn potential(&self, t: f64, y: &DVector<f64>, pt: &Point) -> f64 {
        t * self.c.dot(y)
            - pt.slacks.iter().map(|r| r.ln()).sum::<f64>()
            - pt.lmi.iter().map(|(_, ld)| ld).sum::<f64>()
    }

    fn gradient_hessian(&self, t: f64, pt: &Point) -> (DVector<f64>, DMatrix<f64>) {
        let inv = pt.slacks.map(|r| 1.0 / r);
        let mut grad = &self.c * t - &self.rows * &inv;
        let mut scaled = self.rows.clone();
        for (mut col, w) in scaled.column_iter_mut().zip(inv.iter()) {
            col *= *w;
        }
        let mut hess = &scaled * scaled.transpose();

        for (lmi, (w, _)) in self.lmis.iter().zip(&pt.lmi) {
            let w2 = w * w;
            let half = |i: usize, j: usize| if i == j { 0.5 } else { 1.0 };
            for (a, &(i, j)) in self.pairs.iter().enumerate() {
                let sa = half(i, j);
                grad[a] -= lmi.sign * sa * 2.0 * w[(i, j)];
                for (b, &(p, q)) in self.pairs.iter().enumerate().skip(a) {
                    let v = sa * half(p, q) * 2.0 * (w[(i, q)] * w[(j, p)] + w[(i, p)] * w[(j, q)]);
                    hess[(a, b)] += v;
                    if b != a {
                        hess[(b, a)] += v;
                    }
                }
                if let Some((e, coef)) = lmi.extra {
                    let v = lmi.sign * coef * sa * 2.0 * w2[(i, j)];
                    hess[(a, e)] += v;
                    hess[(e, a)] += v;
                }
            }
            if let Some((e, coef)) = lmi.extra {
                grad[e] -= coef * w.trace();
                hess[(e, e)] += coef * coef * w2.trace();
            }
        }
        (grad, hess)
    }

    /// Newton direction with diagonal regularization when the Hessian is
    /// numerically singular.
    fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
        let scale = hess.diagonal().amax().max(1e-300);
        let mut reg = 0.0;
        for _ in 0..12 {
            let mut h = hess.clone();
            if reg > 0.0 {
                for i in 0..h.nrows() {
                    h[(i, i)] += reg * scale;
                }
            }
            if let Some(ch) = h.cholesky() {
                let dy = ch.solve(&(-grad));
                if dy.iter().all(|v| v.is_finite()) {
                    return Some(dy);
                }
            }
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
        }
        None
    }

    /// Largest step keeping every linear slack positive.
    fn max_linear_step(&self, pt: &Point, dy: &DVector<f64>) -> f64 {
        let rate = self.rows.tr_mul(dy);
        rate.iter()
            .zip(pt.slacks.iter())
            .filter(|(d, _)| **d < 0.0)
            .map(|(d, r)| -r / d)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self, y: &DVector<f64>) -> bool {
        self.evaluate(y).is_some()
    }

    /// Follows the central path from the strictly feasible `y0` until the
    /// observer stops it.
    pub fn run(
        &self,
        y0: DVector<f64>,
        settings: Settings,
        mut observe: impl FnMut(Event<'_>) -> Control,
    ) -> Result<DVector<f64>> {
        let mut y = y0;
        let mut pt = self
            .evaluate(&y)
            .ok_or_else(|| Error::Internal("barrier start point is not interior".into()))?;
        let nu = self.barrier_degree();
        let mut t = settings.t0;
        let mut newton = 0usize;
        loop {
            // Centering; past the per-weight cap round-off usually dominates,
            // so move on to the next weight.
            for _ in 0..MAX_CENTERING_STEPS {
                if newton >= settings.max_newton {
                    return Err(Error::IterationLimit(newton));
                }
                newton += 1;
                let (grad, hess) = self.gradient_hessian(t, &pt);
                let Some(dy) = Self::newton_direction(&grad, &hess) else {
                    break;
                };
                let slope = grad.dot(&dy);
                if !(slope < 0.0) || -slope / 2.0 <= 1e-9 {
                    break;
                }
                let f0 = self.potential(t, &y, &pt);
                let mut alpha = (0.99 * self.max_linear_step(&pt, &dy)).min(1.0);
                let mut accepted = None;
                while alpha > 1e-14 {
                    let trial = &y + &dy * alpha;
                    if let Some(tp) = self.evaluate(&trial) {
                        let f1 = self.potential(t, &trial, &tp);
                        if f1 <= f0 + 0.01 * alpha * slope {
                            accepted = Some((trial, tp));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some((trial, tp)) = accepted else {
                    // Stalled: round-off dominates, move on to the next weight.
                    break;
                };
                y = trial;
                pt = tp;
                if observe(Event::Step(&y)) == Control::Stop {
                    return Ok(y);
                }
            }
            if observe(Event::Centered { y: &y, gap: nu / t }) == Control::Stop {
                return Ok(y);
            }
            t *= settings.mu;
            if !t.is_finite() || t > 1e40 {
                return Err(Error::Internal("barrier weight overflow".into()));
            }
        }
    }
}
