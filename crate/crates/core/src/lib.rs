//! Elephant random walks with k-fold memory extraction.
//!
//! At each step the walker draws `k` of its past steps uniformly with
//! replacement and follows their majority direction with probability `p`.
//! The share of positive steps is then a Hill–Lane–Sudderth urn with urn
//! function `π_k(y) = (1 - p) + (2p - 1) P_k(y)`.
//!
//! * [`urn`] — urn functions, fixed points and critical parameters.
//! * [`exact`] — exact finite-`N` laws by forward recursion in log space.
//! * [`mc`] — seeded, thread-count-independent Monte Carlo ensembles.
//! * [`trajectories`] — rate functional, variational paths, zero-cost paths.
//! * [`cgf`] — cumulant generating functions and Legendre transforms.
//! * [`phase`] — region classification of the `(p, x)` plane.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common case.

// Negated comparisons are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cgf;
pub mod error;
pub mod exact;
pub mod mc;
pub mod ode;
pub mod phase;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod stats;
pub mod trajectories;
pub mod urn;

pub use error::{Error, Result};
pub use scalar::Real;

pub type UrnSpec64 = urn::UrnFunctionSpec<f64>;
pub type UrnSpec32 = urn::UrnFunctionSpec<f32>;
pub type DistributionTable64 = exact::DistributionTable<f64>;
pub type DistributionTable32 = exact::DistributionTable<f32>;
pub type EntropyCurve64 = exact::EntropyCurve<f64>;
pub type Trajectory64 = trajectories::Trajectory<f64>;
pub type CgfCurve64 = cgf::CgfCurve<f64>;
pub type EnsembleResult64 = mc::EnsembleResult<f64>;
pub type PhaseCell64 = phase::PhaseCell<f64>;
