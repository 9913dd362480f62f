//! Path simulation of `(S, X)` and Monte Carlo estimation of the objective.
//!
//! Path `i` always draws from stream `i` of the run seed, and per-path
//! results are combined in a fixed order, so estimates are bit-identical for
//! any thread count.

mod estimate;
mod exec;
mod spread;
mod wealth;

pub use estimate::{
    dominance_test, estimate_objective, mean_and_se, path_objectives, Comparison, DominanceReport, McEstimate,
};
pub use exec::{map_paths, path_rng, Execution};
pub use spread::{
    euler_spread_from_increments, factor_covariance, simulate_spread, time_grid, SpreadPaths, SpreadScheme,
};
pub use wealth::{simulate_wealth, PathBundle, WealthScheme};
