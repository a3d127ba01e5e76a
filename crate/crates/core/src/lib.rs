//! Weighted-indexed semi-Markov chains for high-frequency returns.
//!
//! The pipeline runs tick ingestion, return discretization, kernel
//! estimation conditional on a volatility index, Monte Carlo simulation and
//! stylized-fact statistics. With the `parallel` feature (default) the
//! embarrassingly parallel loops run on rayon; without it they run
//! sequentially and produce identical results.

pub mod discretize;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod index;
pub mod ingestion;
pub mod model;
mod par;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use discretize::{fit_index_levels, fit_return_bins, ReturnBins};
pub use error::{Error, Result};
pub use estimation::{build_trajectory, fit, fit_plain_smc, FitOptions};
pub use index::{index_at_time, index_at_transitions, IndexEvaluator};
pub use ingestion::{compute_returns, parse_ticks, resample, ReturnSeries, TickSeries};
pub use model::{
    IndexConfig, IndexLevels, JumpChain, KernelRow, Memory, SojournDist, StateSpace, Trajectory,
    WismcModel,
};
pub use simulate::{simulate_path, simulate_paths, simulate_returns, SimConfig};
pub use stats::{acf_raw, acf_squared, fpt_distribution, mse_acf, AcfCurve, FptSample};

/// True when the crate was built with the rayon backend.
pub fn is_parallel() -> bool {
    par::is_parallel()
}
