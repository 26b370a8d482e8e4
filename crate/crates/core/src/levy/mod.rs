//! Levy triplets, jump measures, characteristic exponents, generators and
//! path simulation, including the `hbar`-scaled families used for the
//! semiclassical limit.

mod generator;
mod measure;
mod model;
mod moments;
mod path;

pub use generator::{apply_generator, generator_at, GeneratorOutput, UniformGrid};
pub(crate) use generator::{generator_with, Shift};
pub use measure::{Atom, JumpMeasure, GAMMA_CUTOFF, GAMMA_EPSILON, GAMMA_NODES};
pub use model::{characteristic_exponent, characteristic_exponent_imag, EffectiveDynamics, LevyModel, Regime};
pub use moments::{analytic_moment, empirical_moments, MomentEstimate, MomentReport};
pub use path::{sample_path, sample_scaled_brownian, SamplePath};
pub(crate) use path::{check_horizon, simulate, PathBuffer};
