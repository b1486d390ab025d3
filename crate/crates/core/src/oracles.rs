//! White-box reference computations: exact product norms, spectral-radius
//! lower bounds, dense-grid Lyapunov optima, support-set search and
//! Monte-Carlo cap measures. These read the mode matrices and exist to
//! validate the black-box pipeline.

use std::f64::consts::PI;
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::delta_cap;
use crate::certifier::{bisect_gamma, solve_gamma, solve_lambda, LiftedPairs, SolveOptions};
use crate::error::{Error, Result};
use crate::sampling::{sample_unit_sphere, stream_rng, EndpointSet, ModeSet};

/// Largest product count any enumeration may produce.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Sample count of the surrogate sphere "grid" used when `n ≥ 3`.
pub const SURROGATE_SAMPLES: usize = 100_000;

/// Seed of the surrogate sphere samples.
const SURROGATE_SEED: u64 = 0x5eed;

fn check_cap(m: usize, l: usize) -> Result<()> {
    let count = (m as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            count,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// All `m^l` products `A_{j_l} ⋯ A_{j_1}`, sequences in lexicographic order.
#[derive(Debug, Clone)]
pub struct ProductEnumeration {
    pub l: usize,
    pub sequences: Vec<Vec<usize>>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl ProductEnumeration {
    pub fn new(modes: &ModeSet, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("product length must be at least 1"));
        }
        check_cap(modes.len(), l)?;
        let sequences: Vec<Vec<usize>> = (0..l)
            .map(|_| 0..modes.len())
            .multi_cartesian_product()
            .collect();
        let matrices = sequences.par_iter().map(|s| modes.product(s)).collect();
        Ok(Self { l, sequences, matrices })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// `max ‖A‖₂` over all products of length `l`.
pub fn exact_b(modes: &ModeSet, l: usize) -> Result<f64> {
    let prods = ProductEnumeration::new(modes, l)?;
    Ok(prods
        .matrices
        .par_iter()
        .map(|a| a.singular_values().max())
        .reduce(|| 0.0, f64::max))
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `max_{k ≤ k_max} max_{|σ| = k} ρ(A_σ)^{1/k}`, a lower bound on the JSR.
pub fn jsr_lower_bound(modes: &ModeSet, k_max: usize) -> Result<f64> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    check_cap(modes.len(), k_max)?;
    let mut best = 0.0f64;
    let mut layer: Vec<DMatrix<f64>> = vec![DMatrix::identity(modes.dim(), modes.dim())];
    for k in 1..=k_max {
        layer = layer
            .iter()
            .flat_map(|p| modes.matrices().iter().map(move |a| a * p))
            .collect();
        let rho = layer
            .par_iter()
            .map(spectral_radius)
            .reduce(|| 0.0, f64::max);
        best = best.max(rho.powf(1.0 / k as f64));
    }
    Ok(best)
}

/// Output of [`whitebox_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteboxGamma {
    pub gamma: f64,
    /// Number of sphere points.
    pub points: usize,
    /// Number of (point, product) constraints.
    pub constraints: usize,
    /// `true` when random samples stood in for a grid (`n ≥ 3`).
    pub surrogate: bool,
}

/// Sphere points: `grid` equally spaced angles for `n = 2`, otherwise
/// [`SURROGATE_SAMPLES`] seeded uniform samples.
fn sphere_points(n: usize, grid: usize) -> (Vec<Vec<f64>>, bool) {
    if n == 2 {
        let pts = (0..grid)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / grid as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        (pts, false)
    } else {
        let mut rng = stream_rng(SURROGATE_SEED, 0);
        let pts = (0..SURROGATE_SAMPLES)
            .map(|_| sample_unit_sphere(n, &mut rng))
            .collect();
        (pts, true)
    }
}

/// Lyapunov optimum over every product of length `l` applied at every point
/// of a dense sphere grid.
pub fn whitebox_gamma(modes: &ModeSet, l: usize, d: usize, grid: usize, opts: &SolveOptions) -> Result<WhiteboxGamma> {
    if modes.dim() < 2 {
        return Err(Error::invalid("white-box solve needs dimension at least 2"));
    }
    if modes.dim() == 2 && grid < 3 {
        return Err(Error::invalid("grid must have at least 3 points"));
    }
    let prods = ProductEnumeration::new(modes, l)?;
    let (points, surrogate) = sphere_points(modes.dim(), grid);
    let mut pairs = Vec::with_capacity(points.len() * prods.len());
    for x in &points {
        let xv = nalgebra::DVector::from_column_slice(x);
        for a in &prods.matrices {
            pairs.push((x.clone(), (a * &xv).iter().copied().collect()));
        }
    }
    let constraints = pairs.len();
    let obs = EndpointSet::new(modes.dim(), l, pairs)?;
    let sol = solve_gamma(&obs, d, opts)?;
    Ok(WhiteboxGamma {
        gamma: sol.gamma_star,
        points: points.len(),
        constraints,
        surrogate,
    })
}

/// Output of [`support_constraints`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    /// Indices into the observation set.
    pub indices: Vec<usize>,
    pub gamma_full: f64,
    pub gamma_subset: f64,
    pub exhaustive: bool,
}

fn subset_gamma(obs: &EndpointSet, d: usize, idx: &[usize], opts: &SolveOptions) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let sub = obs.subset(idx);
    let lambda = solve_lambda(&sub)?;
    Ok(bisect_gamma(&Arc::new(LiftedPairs::new(&sub, d)?), lambda, opts)?.gamma_star)
}

/// A small subset of observations reproducing the sampled optimum: the
/// smallest one by exhaustive search when `N ≤ 20`, a greedy reduction
/// otherwise.
pub fn support_constraints(obs: &EndpointSet, d: usize, opts: &SolveOptions) -> Result<SupportSet> {
    let all: Vec<usize> = (0..obs.len()).collect();
    let gamma_full = subset_gamma(obs, d, &all, opts)?;
    let target = gamma_full - 10.0 * opts.bisection_rel_tol * gamma_full;
    let reproduces = |g: f64| g >= target;

    if obs.len() <= 20 {
        for size in 0..=obs.len() {
            let hit = (0..obs.len())
                .combinations(size)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|s| subset_gamma(obs, d, &s, opts).map(|g| (s, g)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .find(|(_, g)| reproduces(*g));
            if let Some((indices, gamma_subset)) = hit {
                return Ok(SupportSet {
                    indices,
                    gamma_full,
                    gamma_subset,
                    exhaustive: true,
                });
            }
        }
        unreachable!("the full set reproduces itself");
    }

    let mut keep = all;
    let mut gamma_subset = gamma_full;
    let mut i = 0;
    while i < keep.len() {
        let mut trial = keep.clone();
        trial.remove(i);
        let g = subset_gamma(obs, d, &trial, opts)?;
        if reproduces(g) {
            keep = trial;
            gamma_subset = g;
        } else {
            i += 1;
        }
    }
    Ok(SupportSet {
        indices: keep,
        gamma_full,
        gamma_subset,
        exhaustive: false,
    })
}

/// Fraction of `samples` uniform sphere points inside the cap `C(c, ε)`.
/// Chunk `k` of 10 000 samples draws from stream `(seed, k)`, so the result
/// does not depend on thread scheduling.
pub fn cap_measure_mc(c: &[f64], eps: f64, samples: usize, seed: u64) -> Result<f64> {
    const CHUNK: usize = 10_000;
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let n = c.len();
    let delta = delta_cap(eps, n)?;
    let chunks = samples.div_ceil(CHUNK);
    let inside: usize = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let count = CHUNK.min(samples - k * CHUNK);
            (0..count)
                .filter(|_| {
                    let x = sample_unit_sphere(n, &mut rng);
                    c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() > delta
                })
                .count()
        })
        .sum();
    Ok(inside as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::simulate;
    use std::f64::consts::SQRT_2;

    fn scalar(c: f64) -> ModeSet {
        ModeSet::new(2, vec![DMatrix::identity(2, 2) * c]).unwrap()
    }

    #[test]
    fn exact_b_examples() {
        let p = ModeSet::parrilo();
        assert!((exact_b(&p, 1).unwrap() - SQRT_2).abs() < 1e-12);
        assert!((exact_b(&p, 2).unwrap() - SQRT_2).abs() < 1e-12);
        assert!((exact_b(&scalar(2.0), 3).unwrap() - 8.0).abs() < 1e-12);
        let prods = ProductEnumeration::new(&p, 2).unwrap();
        assert_eq!(prods.len(), 4);
        assert_eq!(prods.sequences[1], vec![0, 1]);
    }

    #[test]
    fn lower_bound_examples() {
        let p = ModeSet::parrilo();
        assert!((jsr_lower_bound(&p, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((jsr_lower_bound(&p, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((jsr_lower_bound(&scalar(2.0), 3).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(jsr_lower_bound(&p, 25), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn whitebox_scalar() {
        let w = whitebox_gamma(&scalar(2.0), 1, 2, 36, &SolveOptions::default()).unwrap();
        assert!((w.gamma - 2.0).abs() < 1e-5);
        assert_eq!((w.points, w.constraints, w.surrogate), (36, 36, false));
    }

    #[test]
    fn support_examples() {
        let opts = SolveOptions::default();
        let obs = simulate(&scalar(2.0), 6, 1, 2).unwrap().endpoints();
        assert_eq!(support_constraints(&obs, 1, &opts).unwrap().indices.len(), 1);
        let zero = EndpointSet::new(2, 1, vec![(vec![1.0, 0.0], vec![0.0, 0.0]); 3]).unwrap();
        let s = support_constraints(&zero, 1, &opts).unwrap();
        assert!(s.indices.is_empty() && s.gamma_full == 0.0);
    }

    #[test]
    fn cap_measure_examples() {
        let m = cap_measure_mc(&[1.0, 0.0], 0.25, 100_000, 1).unwrap();
        assert!((m - 0.25).abs() < 0.006, "{m}");
        let h = cap_measure_mc(&[0.0, 1.0], 0.7, 100_000, 2).unwrap();
        assert!((h - 0.5).abs() < 0.007, "{h}");
        assert_eq!(m, cap_measure_mc(&[1.0, 0.0], 0.25, 100_000, 1).unwrap());
        assert!(cap_measure_mc(&[1.0, 0.0, 0.0], 1e-6, 10_000, 3).unwrap() < 0.01);
    }
}
