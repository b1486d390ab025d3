//! Observation sets: simulation of a known mode set and ingestion of
//! external trajectory files.
//!
//! An [`ObservationSet`] may carry the hidden mode sequences of simulated
//! trajectories. The certifier never receives it directly; it works on the
//! [`EndpointSet`] view, which holds only `(x0, xl)` pairs.

mod io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::delta_cap;
use crate::error::{Error, Result};

pub use io::{load_observations, read_observations, save_observations, write_observations};

/// Tolerance on `‖x0‖ = 1`.
pub const UNIT_TOL: f64 = 1e-12;

/// Name of the generator recorded in provenance.
pub const GENERATOR: &str = "ChaCha20";

/// Seeded generator for trajectory `stream` of a run with master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A finite set of `n × n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    n: usize,
    matrices: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModeSetFile {
    dim: usize,
    matrices: Vec<Vec<Vec<f64>>>,
}

impl ModeSet {
    pub fn new(n: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("mode dimension must be at least 1"));
        }
        if matrices.is_empty() {
            return Err(Error::invalid("mode set is empty"));
        }
        for (k, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::invalid(format!(
                    "mode {k} is {}×{}, expected {n}×{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mode matrix"));
            }
        }
        Ok(Self { n, matrices })
    }

    /// Builds from row-major nested vectors.
    pub fn from_rows(n: usize, mats: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut out = Vec::with_capacity(mats.len());
        for (k, rows) in mats.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::invalid(format!("mode {k} is not {n}×{n}")));
            }
            out.push(DMatrix::from_fn(n, n, |i, j| rows[i][j]));
        }
        Self::new(n, out)
    }

    /// `{[[1,0],[1,0]], [[0,1],[0,−1]]}`: JSR 1, no common quadratic Lyapunov
    /// function, best quadratic bound `√2`.
    pub fn parrilo() -> Self {
        Self::new(
            2,
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]),
            ],
        )
        .expect("valid constant mode set")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `A_{j_l} ⋯ A_{j_1}` for the sequence `(j_1, …, j_l)` (0-based indices).
    pub fn product(&self, seq: &[usize]) -> DMatrix<f64> {
        seq.iter()
            .fold(DMatrix::identity(self.n, self.n), |acc, &j| &self.matrices[j] * acc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModeSetFile = serde_json::from_str(text)?;
        Self::from_rows(file.dim, &file.matrices)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModeSetFile {
            dim: self.n,
            matrices: self
                .matrices
                .iter()
                .map(|a| (0..self.n).map(|i| a.row(i).iter().copied().collect()).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One observed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Initial state, unit norm.
    pub x0: Vec<f64>,
    /// States `x_1, …, x_{l−1}`; kept for the file format, unused by the solvers.
    pub intermediate: Vec<Vec<f64>>,
    /// State after `l` steps.
    pub xl: Vec<f64>,
    /// Mode sequence `(j_1, …, j_l)`, known only for simulated data.
    pub hidden_modes: Option<Vec<usize>>,
}

/// Where an observation set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Simulated { generator: String, seed: u64 },
    File { path: String },
    Constructed,
}

/// `N` trajectories of common length `l` in `Rⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    n: usize,
    l: usize,
    observations: Vec<Observation>,
    provenance: Provenance,
}

impl ObservationSet {
    pub fn new(
        n: usize,
        l: usize,
        observations: Vec<Observation>,
        provenance: Provenance,
    ) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::invalid("dimension and trace length must be at least 1"));
        }
        for (i, o) in observations.iter().enumerate() {
            if o.x0.len() != n || o.xl.len() != n || o.intermediate.iter().any(|s| s.len() != n) {
                return Err(Error::invalid(format!("observation {i} has wrong dimension")));
            }
            if !o.intermediate.is_empty() && o.intermediate.len() != l - 1 {
                return Err(Error::invalid(format!("observation {i} has wrong trace length")));
            }
            if (norm(&o.x0) - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("observation {i}: initial state is not unit norm")));
            }
            if o.xl.iter().chain(o.intermediate.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("observed state"));
            }
        }
        Ok(Self {
            n,
            l,
            observations,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace_len(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The black-box view handed to the certifier.
    pub fn endpoints(&self) -> EndpointSet {
        EndpointSet {
            n: self.n,
            l: self.l,
            x0: self.observations.iter().map(|o| o.x0.clone()).collect(),
            xl: self.observations.iter().map(|o| o.xl.clone()).collect(),
        }
    }
}

/// Endpoint pairs `(x0, xl)` only: what the certifier is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSet {
    n: usize,
    l: usize,
    x0: Vec<Vec<f64>>,
    xl: Vec<Vec<f64>>,
}

impl EndpointSet {
    /// Builds from explicit pairs; every `x0` must have unit norm.
    pub fn new(n: usize, l: usize, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::invalid("dimension and trace length must be at least 1"));
        }
        let mut x0 = Vec::with_capacity(pairs.len());
        let mut xl = Vec::with_capacity(pairs.len());
        for (i, (a, b)) in pairs.into_iter().enumerate() {
            if a.len() != n || b.len() != n {
                return Err(Error::invalid(format!("pair {i} has wrong dimension")));
            }
            if a.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("endpoint pair"));
            }
            if (norm(&a) - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("pair {i}: x0 is not unit norm")));
            }
            x0.push(a);
            xl.push(b);
        }
        Ok(Self { n, l, x0, xl })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace_len(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.x0.iter().zip(&self.xl).map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    pub fn x0(&self, i: usize) -> &[f64] {
        &self.x0[i]
    }

    pub fn xl(&self, i: usize) -> &[f64] {
        &self.xl[i]
    }

    /// The observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            n: self.n,
            l: self.l,
            x0: indices.iter().map(|&i| self.x0[i].clone()).collect(),
            xl: indices.iter().map(|&i| self.xl[i].clone()).collect(),
        }
    }

    /// Same `x0`, every `xl` multiplied by `factor`.
    pub fn scale_images(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            l: self.l,
            x0: self.x0.clone(),
            xl: self
                .xl
                .iter()
                .map(|v| v.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Uniform point on the unit sphere of `Rⁿ` (normalized Gaussian vector).
pub fn sample_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "sphere dimension must be at least 1");
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&g);
        if r > 1e-150 && r.is_finite() {
            return g.into_iter().map(|v| v / r).collect();
        }
    }
}

/// `l` independent uniform mode indices in `0..m`.
pub fn sample_mode_sequence<R: Rng + ?Sized>(m: usize, l: usize, rng: &mut R) -> Vec<usize> {
    assert!(m >= 1, "need at least one mode");
    (0..l).map(|_| rng.random_range(0..m)).collect()
}

/// Simulates `N` trajectories of length `l` with uniform initial states and
/// uniform mode sequences. Trajectory `i` draws from its own stream
/// `(seed, i)`, so the result does not depend on scheduling.
pub fn simulate(modes: &ModeSet, n_traj: usize, l: usize, seed: u64) -> Result<ObservationSet> {
    if n_traj == 0 {
        return Err(Error::invalid("number of trajectories must be at least 1"));
    }
    if l == 0 {
        return Err(Error::invalid("trace length must be at least 1"));
    }
    let n = modes.dim();
    let observations: Vec<Observation> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x0 = sample_unit_sphere(n, &mut rng);
            let seq = sample_mode_sequence(modes.len(), l, &mut rng);
            let mut state = DVector::from_column_slice(&x0);
            let mut intermediate = Vec::with_capacity(l - 1);
            for (step, &j) in seq.iter().enumerate() {
                state = &modes.matrices[j] * state;
                if step + 1 < l {
                    intermediate.push(state.iter().copied().collect());
                }
            }
            Observation {
                x0,
                intermediate,
                xl: state.iter().copied().collect(),
                hidden_modes: Some(seq),
            }
        })
        .collect();
    ObservationSet::new(
        n,
        l,
        observations,
        Provenance::Simulated {
            generator: GENERATOR.to_string(),
            seed,
        },
    )
}

/// Whether unit vector `x` lies in the open cap `{cᵀx > δ(ε)}` around `c`.
pub fn cap_membership(c: &[f64], eps: f64, x: &[f64]) -> Result<bool> {
    if c.len() != x.len() {
        return Err(Error::invalid("cap center and point differ in dimension"));
    }
    let delta = delta_cap(eps, c.len())?;
    let dot: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(dot > delta)
}
