//! Approximate the distribution of a weighted sum of correlated lognormal
//! random variables by a single lognormal.
//!
//! The sum's moment generating function is evaluated at two negative points
//! with a 12-node Gauss-Hermite rule over the Cholesky-decorrelated normal
//! system, and Newton's method picks the lognormal whose own quadrature MGF
//! matches at both points. A seeded Monte-Carlo engine provides ground-truth
//! CDFs, and a grid search tunes the pair of MGF evaluation points.
//!
//! All lognormals use the base-10 decibel convention `Y = 10^(X/10) = e^(θX)`
//! with `θ = ln(10)/10`.

// `!(x > 0.0)` is used deliberately throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximator;
pub mod cli;
pub mod error;
pub mod factorize;
pub mod mgf;
pub mod moments;
pub mod montecarlo;
pub mod normal;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod tuner;

pub use approximator::{approximate, moment_matched, ApproxResult, Approximator, Lognormal};
pub use error::{Error, Result};
pub use mgf::{MgfConstants, TPair};
pub use moments::{NormalSystem, SumSpec, THETA};
pub use montecarlo::{CdfGrid, SimConfig};
pub use solver::{SolveOutcome, SolverConfig};
pub use tuner::{TunerConfig, TunerResult, WeightFn};
