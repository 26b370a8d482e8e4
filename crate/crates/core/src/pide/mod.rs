//! Deterministic method-of-lines solver for the (scaled) PIDEs, used as an
//! oracle for the Monte Carlo engine and as the data source of `hbar` sweeps.

mod io;
mod refine;
mod solver;

pub use io::{read_slab_bin, write_slab_bin, write_slab_csv, Slab, SLAB_MAGIC, SLAB_VERSION};
pub use refine::{refine_order, Refinement, RefinementReport};
pub use solver::{solve_pide, solve_pide_scaled, suggest_half_width, GridParams, GridSolution};
