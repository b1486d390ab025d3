//! Data-driven stability certificates for switched linear systems.
//!
//! Given `N` observed trajectory endpoints `(x0, xl)` of an unknown switched
//! linear system `x_{k+1} = A_{τ(k)} x_k`, this crate solves sampled quadratic
//! and sum-of-squares Lyapunov programs and turns their optimum into an upper
//! bound on the joint spectral radius that holds with a user-chosen
//! confidence.
//!
//! The pipeline is:
//!
//! 1. [`sampling`] produces or loads an [`ObservationSet`]; the certifier only
//!    ever sees its black-box [`EndpointSet`] view.
//! 2. [`certifier`] computes `λ*` (largest observed gain) and `γ*` (optimal
//!    sampled Lyapunov decay rate) by bisection over an LMI feasibility oracle,
//!    then picks the best-conditioned Lyapunov matrix.
//! 3. [`bounds`] converts `(γ*, κ(P), λ*)` into a probabilistic JSR bound using
//!    the spherical-cap quantities from [`cap`].
//!
//! [`oracles`] holds white-box reference computations used for validation.

// `!(x >= 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cap;
pub mod certifier;
mod error;
pub mod lift;
pub mod oracles;
pub mod sampling;
pub mod symmetric;

pub use bounds::{certify, CertificateReport, RegimeFlags};
pub use cap::{CapParams, ConfidenceBudget};
pub use certifier::{GammaSolution, LyapunovCandidate, SolveOptions};
pub use error::{Error, Result};
pub use lift::{LiftBasis, LiftedVector, MultiIndex};
pub use sampling::{EndpointSet, ModeSet, Observation, ObservationSet, Provenance};
pub use symmetric::{MatrixMetrics, SymMatrix};
