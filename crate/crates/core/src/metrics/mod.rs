//! Distances, functionals and the executable property checks built on them.
//! Inputs may be `f32` or `f64`; all outputs are `f64`.

mod checks;
mod cvar;
mod discrete;
mod tv;
mod wasserstein;

pub use checks::{
    apply_bellman, check_contraction, check_cvar_lipschitz, check_cvar_lipschitz_exact, check_tv_dominance,
    CheckOutcome,
};
pub use cvar::{cvar, cvar_discrete, DEFAULT_CVAR_GRID};
pub use discrete::DiscreteLaw;
pub use tv::{bin_masses, empirical_tv, tv_against_masses, tv_density_1d, HistogramSpec};
pub use wasserstein::{exact_wasserstein_p, transport_cost, wasserstein1_1d, MAX_ASSIGNMENT, MAX_TRANSPORT_ATOMS};
