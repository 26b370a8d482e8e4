//! Feynman-Kac representations of Levy-driven partial integro-differential
//! equations: Monte Carlo estimators, a deterministic method-of-lines
//! solver used as an oracle, and the semiclassical (`hbar -> 0`)
//! large-deviation machinery (Legendre transforms, Euler-Lagrange
//! minimizers, Gaussian prefactors and drift asymptotics).

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod fk;
pub mod levy;
pub mod pide;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod run;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
