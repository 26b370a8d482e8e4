//! Semiclassical prefactors, Gaussian path functionals, drift predictions
//! and `hbar` sweeps against the large-deviation expansion.

mod drift;
mod prefactor;
mod sweep;
mod wiener;

pub use drift::{drift_prediction_config, drift_prediction_momentum, DriftPrediction};
pub use prefactor::{
    cameron_martin, gaussian_k0, gaussian_k1bar, jump_prefactor_mc, prefactor_f, prefactor_mc, K1Estimate, PrefactorDirection,
    PrefactorSpec, PrefactorValue, MIN_PREFACTOR_PATHS,
};
pub use sweep::{hbar_sweep, sweep_minimizer, ExpansionReport, SweepSource, DEFAULT_LADDER};
