//! Hamiltonians, Legendre transforms, action functionals and the
//! Euler-Lagrange extremals of the semiclassical expansions.

mod action;
mod el;
mod hamiltonian;

pub use action::{action_parts, action_parts_with_derivative, action_value, ActionParts, BoundaryTerm};
pub use el::{
    probe_local_minimality, solve_el_config, solve_el_jump, solve_el_momentum, HyperbolicPath, MinimizerResult, ProbeReport,
    EL_STEPS, SHOOT_TOL,
};
pub use hamiltonian::{hamiltonian_h0, legendre_l0, Hamiltonian, Lagrangian, LagrangianForm, Legendre};
