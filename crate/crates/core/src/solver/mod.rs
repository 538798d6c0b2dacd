//! Numerical kernels shared by the design modules.

mod augmented;
mod dc;
mod functional;
mod projection;
mod waterfill;

pub use augmented::{
    find_feasible_point, maximize_covariance, maximize_psd, minimize_psd, ConstraintSpec, Direction, FeasibleSet, PsdProblem,
    SolveOptions, SolveReport, TraceEntry,
};
pub use dc::{dc_rank_one_round, rank_gap, DcOutcome, DcStep, DcSubproblem, PenaltySchedule};
pub use functional::{total, FnFunctional, Functional, LinearFunctional, OfTotal, Scaled};
pub use projection::{dominant_eigenpair, project_blocks, project_eigenvalues, project_psd_trace};
pub use waterfill::{water_filling, water_filling_capacity};
