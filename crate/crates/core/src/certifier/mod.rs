//! Sampled Lyapunov programs: `λ*` (largest observed image norm), and `γ*`
//! for quadratic (`d = 1`) and SOS (`d ≥ 2`) candidates by bisection over a
//! semidefinite feasibility oracle, followed by a condition-number
//! tie-break.

mod barrier;
mod constraints;

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::EndpointSet;
use crate::symmetric::{packed_len, SymMatrix};
use barrier::{BarrierProblem, Control, Event, Settings, ShiftedLmi};

pub use constraints::{assemble_constraints, quad_coeffs, FeasibilitySystem, LiftedPairs, MAX_LIFT_DIM};

/// Relative slack used when re-checking solver output against the exact
/// constraints.
const VERIFY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Upper bound `C` on `λmax(P)` once `λmin(P)` is normalized to 1.
    #[serde(rename = "C_bound")]
    pub c_bound: f64,
    pub bisection_rel_tol: f64,
    pub feasibility_margin: f64,
    pub tiebreak_slack: f64,
    /// Newton-step budget per barrier solve.
    pub max_newton: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            c_bound: 1e8,
            bisection_rel_tol: 1e-6,
            feasibility_margin: 1e-10,
            tiebreak_slack: 1e-7,
            max_newton: 5000,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("C bound", self.c_bound),
            ("bisection tolerance", self.bisection_rel_tol),
            ("feasibility margin", self.feasibility_margin),
            ("tie-break slack", self.tiebreak_slack),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.c_bound < 1.0 {
            return Err(Error::invalid("C bound must be at least 1"));
        }
        if self.max_newton == 0 {
            return Err(Error::invalid("Newton budget must be positive"));
        }
        Ok(())
    }
}

/// A certified pair `(γ, P)` with `P ⪰ I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCandidate {
    pub degree_half: usize,
    /// Rate at which every sampled decrease constraint holds for `P`.
    pub gamma: f64,
    #[serde(rename = "P")]
    pub p: SymMatrix,
    pub kappa: f64,
    pub c_bound_active: bool,
}

/// Result of [`solve_gamma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSolution {
    /// Upper end of the final bisection bracket.
    pub gamma_star: f64,
    pub lambda_star: f64,
    /// Tie-broken candidate, feasible at `γ*·(1 + tiebreak_slack)`.
    pub candidate: LyapunovCandidate,
    /// `κ` of the raw bisection witness at `γ*`.
    pub witness_kappa: f64,
    pub bisection_steps: usize,
}

/// Outcome of the feasibility oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// A witness with `λmin(P) = 1`.
    Feasible(SymMatrix),
    Infeasible { c_bound_binding: bool },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// `λ* = maxᵢ ‖xl,ᵢ‖` (initial states are unit vectors).
pub fn solve_lambda(obs: &EndpointSet) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    Ok(obs
        .pairs()
        .map(|(_, xl)| crate::sampling::norm(xl))
        .fold(0.0, f64::max))
}

fn normalized(p: &SymMatrix) -> Option<SymMatrix> {
    let lmin = p.lambda_min();
    (lmin > 0.0 && lmin.is_finite()).then(|| p.scaled(1.0 / lmin))
}

fn active_rows(sys: &FeasibilitySystem) -> Vec<usize> {
    let pairs = sys.pairs();
    (0..sys.len()).filter(|&i| pairs.image_sq(i) > 0.0).collect()
}

fn identity_works(sys: &FeasibilitySystem, rows: &[usize]) -> bool {
    let pairs = sys.pairs();
    rows.iter()
        .all(|&i| pairs.image_sq(i) <= sys.rate() * pairs.source_sq(i))
}

/// Decides whether some `P ⪰ I` with `λmax(P) ≤ C` satisfies every
/// decrease constraint of `sys`.
///
/// Phase I maximizes `s` subject to `⟨Gᵢ, P⟩/nᵢ + s ≤ 0`, `P ⪰ sI`,
/// `D/2 ≤ tr P ≤ D`, where `nᵢ` normalizes each row; the system is strictly
/// feasible iff the optimum is positive and strictly infeasible iff it is
/// negative. Vacuous rows (zero image) are dropped first.
pub fn feasibility_check(sys: &FeasibilitySystem, opts: &SolveOptions) -> Result<Feasibility> {
    opts.validate()?;
    let dim = sys.dim();
    let rows = active_rows(sys);
    if rows.is_empty() {
        return Ok(Feasibility::Feasible(SymMatrix::identity(dim)));
    }
    if sys.rate() == 0.0 {
        return Ok(Feasibility::Infeasible {
            c_bound_binding: false,
        });
    }
    if identity_works(sys, &rows) {
        return Ok(Feasibility::Feasible(SymMatrix::identity(dim)));
    }

    let np = packed_len(dim);
    let k = np + 1;
    let pairs = sys.pairs();
    let p0 = SymMatrix::identity(dim).scaled(0.75);
    let mut a = nalgebra::DMatrix::zeros(k, rows.len() + 2);
    let mut worst = f64::NEG_INFINITY;
    for (col, &i) in rows.iter().enumerate() {
        let scale = pairs.image_sq(i) + sys.rate() * pairs.source_sq(i);
        let row = sys.row(i);
        let mut val = 0.0;
        for (a_entry, (r, p)) in a.column_mut(col).iter_mut().zip(row.iter().zip(p0.packed())) {
            *a_entry = -r / scale;
            val += r * p / scale;
        }
        a[(np, col)] = -1.0;
        worst = worst.max(val);
    }
    // D/2 ≤ tr P ≤ D: the lower side excludes P = 0, so the optimum is
    // strictly negative whenever the system is strictly infeasible.
    let trace_col = rows.len();
    let mut offsets = DVector::zeros(rows.len() + 2);
    for i in 0..dim {
        let k = crate::symmetric::packed_index(dim, i, i);
        a[(k, trace_col)] = -1.0;
        a[(k, trace_col + 1)] = 1.0;
    }
    offsets[trace_col] = dim as f64;
    offsets[trace_col + 1] = -0.5 * dim as f64;

    let mut c = DVector::zeros(k);
    c[np] = -1.0;
    let lmi = ShiftedLmi {
        sign: 1.0,
        extra: Some((np, -1.0)),
        shift: 0.0,
    };
    let problem = BarrierProblem::new(dim, 1, c, a, offsets, vec![lmi]);

    let mut y0 = DVector::zeros(k);
    y0.rows_mut(0, np).copy_from_slice(p0.packed());
    y0[np] = 0.75f64.min(-worst) - 1.0;

    let mut witness: Option<SymMatrix> = None;
    let margin = opts.feasibility_margin;
    let settings = Settings {
        t0: problem.barrier_degree(),
        mu: 10.0,
        max_newton: opts.max_newton,
    };
    problem.run(y0, settings, |event| match event {
        Event::Step(y) => {
            if y[np] > 0.0 {
                let p = SymMatrix::from_packed(dim, y.as_slice()[..np].to_vec());
                if let Some(p) = normalized(&p) {
                    if sys.satisfied_by(&p, VERIFY_SLACK) {
                        witness = Some(p);
                        return Control::Stop;
                    }
                }
            }
            Control::Continue
        }
        Event::Centered { y, gap } => {
            if y[np] + gap < 0.0 || gap < margin {
                Control::Stop
            } else {
                Control::Continue
            }
        }
    })?;

    let Some(p) = witness else {
        return Ok(Feasibility::Infeasible {
            c_bound_binding: false,
        });
    };
    if p.lambda_max() <= opts.c_bound {
        return Ok(Feasibility::Feasible(p));
    }
    // The phase-I point is not conditioning-aware; minimize κ before
    // blaming the bound on ‖P‖.
    let better = minimize_condition(sys, &p, opts, Some(opts.c_bound))?;
    if better.lambda_max() <= opts.c_bound {
        Ok(Feasibility::Feasible(better))
    } else {
        Ok(Feasibility::Infeasible {
            c_bound_binding: true,
        })
    }
}

/// Minimizes `λmax(P)` subject to the decrease constraints of `sys` and
/// `P ⪰ I`, starting from the strictly feasible `start`. With a `target`,
/// stops as soon as `λmax(P) ≤ target` is reached or proven out of reach.
/// Never returns a matrix with larger condition number than `start`.
fn minimize_condition(
    sys: &FeasibilitySystem,
    start: &SymMatrix,
    opts: &SolveOptions,
    target: Option<f64>,
) -> Result<SymMatrix> {
    let dim = sys.dim();
    let rows = active_rows(sys);
    let start = normalized(start).ok_or_else(|| Error::Internal("tie-break start is not positive definite".into()))?;
    if identity_works(sys, &rows) {
        return Ok(SymMatrix::identity(dim));
    }

    let np = packed_len(dim);
    let k = np + 1;
    let pairs = sys.pairs();
    let mut a = nalgebra::DMatrix::zeros(k, rows.len());
    for (col, &i) in rows.iter().enumerate() {
        let scale = pairs.image_sq(i) + sys.rate() * pairs.source_sq(i);
        for (a_entry, r) in a.column_mut(col).iter_mut().zip(sys.row(i)) {
            *a_entry = -r / scale;
        }
    }
    let offsets = DVector::zeros(rows.len());
    let mut c = DVector::zeros(k);
    c[np] = 1.0;
    let lmis = vec![
        ShiftedLmi {
            sign: 1.0,
            extra: None,
            shift: -1.0,
        },
        ShiftedLmi {
            sign: -1.0,
            extra: Some((np, 1.0)),
            shift: 0.0,
        },
    ];
    let problem = BarrierProblem::new(dim, 1, c, a, offsets, lmis);

    let p0 = start.scaled(1.01);
    let mut y0 = DVector::zeros(k);
    y0.rows_mut(0, np).copy_from_slice(p0.packed());
    y0[np] = p0.lambda_max() * 1.01 + 1e-3;

    if !problem.is_interior(&y0) {
        return Ok(start);
    }
    // Weight the objective so that t·λmax starts out comparable to the
    // barrier degree; a unit weight leaves large-λmax starts far from the
    // central path.
    let t0 = problem.barrier_degree() / y0[np];
    let mut last = y0.clone();
    let outcome = problem.run(y0, Settings { t0, mu: 10.0, max_newton: opts.max_newton }, |event| match event {
        Event::Step(y) => {
            last.copy_from(y);
            if target.is_some_and(|c| y[np] <= c) {
                Control::Stop
            } else {
                Control::Continue
            }
        }
        Event::Centered { y, gap } => {
            last.copy_from(y);
            // On the central path λmax* ≥ t − gap.
            if gap <= 1e-10 * y[np].abs().max(1.0) || target.is_some_and(|c| y[np] - gap > c) {
                Control::Stop
            } else {
                Control::Continue
            }
        }
    });
    let y = match outcome {
        Ok(y) => y,
        // Every iterate is feasible; keep the last one.
        Err(Error::IterationLimit(_)) => last,
        Err(e) => return Err(e),
    };
    let candidate = normalized(&SymMatrix::from_packed(dim, y.as_slice()[..np].to_vec()));
    Ok(match candidate {
        Some(p) if sys.satisfied_by(&p, VERIFY_SLACK) && p.metrics().kappa <= start.metrics().kappa => p,
        _ => start,
    })
}

fn candidate(d: usize, gamma: f64, p: SymMatrix, c_hit: bool, opts: &SolveOptions) -> LyapunovCandidate {
    let m = p.metrics();
    LyapunovCandidate {
        degree_half: d,
        gamma,
        c_bound_active: c_hit || m.lambda_max >= opts.c_bound * (1.0 - 1e-9),
        kappa: m.kappa,
        p,
    }
}

/// `min γ` over the sampled constraints by bisection on `[0, λ*^{1/l}]`,
/// then the condition-number tie-break at `γ*·(1 + tiebreak_slack)`.
pub fn solve_gamma(obs: &EndpointSet, d: usize, opts: &SolveOptions) -> Result<GammaSolution> {
    opts.validate()?;
    let lambda_star = solve_lambda(obs)?;
    let pairs = Arc::new(LiftedPairs::new(obs, d)?);
    solve_gamma_lifted(pairs, lambda_star, opts)
}

/// Raw bisection result, before the tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// Upper end of the final bracket; feasible with `witness`.
    pub gamma_star: f64,
    pub witness: SymMatrix,
    pub steps: usize,
    /// Some probe was rejected only because of `λmax(P) ≤ C`.
    pub c_bound_hit: bool,
}

/// Bisection for `min γ` on `[0, λ*^{1/l}]`; the upper end is feasible with
/// `P = I` because every initial state is a unit vector.
pub fn bisect_gamma(pairs: &Arc<LiftedPairs>, lambda_star: f64, opts: &SolveOptions) -> Result<Bisection> {
    opts.validate()?;
    let dim = pairs.dim();
    if lambda_star == 0.0 || pairs.is_empty() {
        return Ok(Bisection {
            gamma_star: 0.0,
            witness: SymMatrix::identity(dim),
            steps: 0,
            c_bound_hit: false,
        });
    }
    let mut lo = 0.0;
    let mut hi = lambda_star.powf(1.0 / pairs.trace_len() as f64);
    let mut witness = SymMatrix::identity(dim);
    let mut c_bound_hit = false;
    let mut steps = 0;
    while hi - lo > opts.bisection_rel_tol * hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        steps += 1;
        match feasibility_check(&FeasibilitySystem::new(pairs.clone(), mid)?, opts)? {
            Feasibility::Feasible(p) => {
                hi = mid;
                witness = p;
            }
            Feasibility::Infeasible { c_bound_binding } => {
                lo = mid;
                c_bound_hit |= c_bound_binding;
            }
        }
    }
    Ok(Bisection {
        gamma_star: hi,
        witness,
        steps,
        c_bound_hit,
    })
}

/// [`solve_gamma`] on already lifted pairs with known `λ*`.
pub fn solve_gamma_lifted(pairs: Arc<LiftedPairs>, lambda_star: f64, opts: &SolveOptions) -> Result<GammaSolution> {
    if pairs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let d = pairs.degree();
    let b = bisect_gamma(&pairs, lambda_star, opts)?;
    let witness_kappa = b.witness.metrics().kappa;
    if b.gamma_star == 0.0 {
        return Ok(GammaSolution {
            gamma_star: 0.0,
            lambda_star,
            candidate: candidate(d, 0.0, b.witness, b.c_bound_hit, opts),
            witness_kappa,
            bisection_steps: b.steps,
        });
    }
    let gamma_c = b.gamma_star * (1.0 + opts.tiebreak_slack);
    let sys = FeasibilitySystem::new(pairs, gamma_c)?;
    let p = minimize_condition(&sys, &b.witness, opts, None)?;
    Ok(GammaSolution {
        gamma_star: b.gamma_star,
        lambda_star,
        candidate: candidate(d, gamma_c, p, b.c_bound_hit, opts),
        witness_kappa,
        bisection_steps: b.steps,
    })
}

/// The minimum-`κ` Lyapunov matrix feasible at `γ*·(1 + tiebreak_slack)`.
pub fn tie_break_p(obs: &EndpointSet, d: usize, gamma_star: f64, opts: &SolveOptions) -> Result<LyapunovCandidate> {
    opts.validate()?;
    let pairs = Arc::new(LiftedPairs::new(obs, d)?);
    let gamma_c = gamma_star * (1.0 + opts.tiebreak_slack);
    let sys = FeasibilitySystem::new(pairs, gamma_c)?;
    match feasibility_check(&sys, opts)? {
        Feasibility::Feasible(w) => {
            let p = minimize_condition(&sys, &w, opts, None)?;
            Ok(candidate(d, gamma_c, p, false, opts))
        }
        Feasibility::Infeasible { .. } => Err(Error::Internal(format!(
            "tie-break problem infeasible at gamma = {gamma_c}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{simulate, ModeSet};
    use nalgebra::DMatrix;

    fn scalar_modes(c: f64) -> ModeSet {
        ModeSet::new(2, vec![DMatrix::identity(2, 2) * c]).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let one = EndpointSet::new(2, 1, vec![(vec![1.0, 0.0], vec![1.0, 1.0])]).unwrap();
        assert!((solve_lambda(&one).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero = EndpointSet::new(2, 1, vec![(vec![0.0, 1.0], vec![0.0, 0.0])]).unwrap();
        assert_eq!(solve_lambda(&zero).unwrap(), 0.0);
        let obs = simulate(&scalar_modes(2.0), 10, 2, 3).unwrap();
        assert!((solve_lambda(&obs.endpoints()).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_examples() {
        let opts = SolveOptions::default();
        let zero = EndpointSet::new(2, 1, vec![(vec![0.0, 1.0], vec![0.0, 0.0])]).unwrap();
        let r = feasibility_check(&assemble_constraints(&zero, 1, 0.0).unwrap(), &opts).unwrap();
        assert_eq!(r, Feasibility::Feasible(SymMatrix::identity(2)));

        let obs = simulate(&scalar_modes(2.0), 30, 1, 5).unwrap().endpoints();
        let below = feasibility_check(&assemble_constraints(&obs, 1, 1.9).unwrap(), &opts).unwrap();
        assert!(!below.is_feasible());
        let above = feasibility_check(&assemble_constraints(&obs, 1, 2.01).unwrap(), &opts).unwrap();
        assert_eq!(above, Feasibility::Feasible(SymMatrix::identity(2)));
    }

    #[test]
    fn gamma_examples() {
        let opts = SolveOptions::default();
        let zero = EndpointSet::new(2, 1, vec![(vec![0.0, 1.0], vec![0.0, 0.0])]).unwrap();
        let sol = solve_gamma(&zero, 1, &opts).unwrap();
        assert_eq!(sol.gamma_star, 0.0);
        assert_eq!(sol.candidate.kappa, 1.0);

        let obs = simulate(&scalar_modes(2.0), 30, 1, 5).unwrap().endpoints();
        let sol = solve_gamma(&obs, 1, &opts).unwrap();
        assert!((sol.gamma_star - 2.0).abs() <= 2.0 * 2e-6, "{}", sol.gamma_star);
        assert_eq!(sol.candidate.p, SymMatrix::identity(2));
        assert_eq!(sol.candidate.kappa, 1.0);
    }

    #[test]
    fn parrilo_quadratic_and_tie_break() {
        let opts = SolveOptions::default();
        let obs = simulate(&ModeSet::parrilo(), 2000, 1, 42).unwrap().endpoints();
        let sol = solve_gamma(&obs, 1, &opts).unwrap();
        assert!((sol.gamma_star - 2f64.sqrt()).abs() < 0.02, "{}", sol.gamma_star);
        assert!(sol.candidate.kappa <= sol.witness_kappa + 1e-6);
        let sys = assemble_constraints(&obs, 1, sol.candidate.gamma).unwrap();
        assert!(sys.satisfied_by(&sol.candidate.p, 1e-8));
        assert!(sol.candidate.p.lambda_min() >= 1.0 - 1e-8);
    }

    #[test]
    fn tie_break_direct() {
        let opts = SolveOptions::default();
        let obs = simulate(&scalar_modes(2.0), 10, 1, 8).unwrap().endpoints();
        let c = tie_break_p(&obs, 1, 2.0, &opts).unwrap();
        assert_eq!(c.kappa, 1.0);
    }
}
