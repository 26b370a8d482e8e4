//! Monte Carlo evaluation of Feynman-Kac expectations
//! `E[g(p + X_t) exp(-hbar^-1 int_0^t U(p + X_s) ds)]`, with semigroup
//! checks and common-random-number drift estimates.

mod drift;
mod estimator;
mod problem;
mod semigroup;

pub use drift::{drift_estimate, DriftEstimate, JACKKNIFE_BATCHES};
pub use estimator::{fk_estimate, fk_estimate_many, McConfig, MCEstimate};
pub use problem::{BoundaryData, Direction, ProblemSpec, RateFunction};
pub use semigroup::{semigroup_residual, SemigroupResidual};
