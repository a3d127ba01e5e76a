//! Monte Carlo simulation of WISMC trajectories.
//!
//! Starting from `(J_0, T_0 = 0, U_0)`, each step draws the next state from
//! `p[J_n][level(U_n)][·]`, draws the sojourn from the matching conditional
//! waiting-time distribution, advances the time, and updates the index with
//! the sojourn just completed. The path stops as soon as `T_{n+1} >= T`.
//!
//! Path `k` of a run uses random stream `k` under the master seed, so results
//! are identical for any number of worker threads.

use crate::error::{Error, Result};
use crate::index::IndexEvaluator;
use crate::model::{JumpChain, Trajectory, WismcModel};
use crate::par;
use crate::rng::PathRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Horizon in minutes.
    pub horizon: u64,
    pub seed: u64,
    pub initial_state: u16,
    /// Overrides the model's `U_0` when set.
    pub initial_index: Option<f64>,
    pub n_paths: usize,
    /// Minutes simulated and discarded before the returned series starts.
    pub burn_in: u64,
    /// Use the nearest populated level for empty cells instead of failing.
    pub allow_fallback: bool,
}

impl SimConfig {
    pub fn new(horizon: u64, seed: u64, initial_state: u16) -> Self {
        SimConfig {
            horizon,
            seed,
            initial_state,
            initial_index: None,
            n_paths: 1,
            burn_in: 0,
            allow_fallback: true,
        }
    }

    /// Starts in the model's median state.
    pub fn for_model(model: &WismcModel, horizon: u64, seed: u64) -> Self {
        SimConfig::new(horizon, seed, model.state_space().median_label())
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::HorizonBeforeOrigin);
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if let Some(u) = self.initial_index {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::InvalidConfig(
                    "initial index must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A simulated trajectory and how often the sparse-cell fallback was used.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub trajectory: Trajectory,
    pub fallback_uses: u64,
    pub transitions: u64,
}

fn run_path(
    model: &WismcModel,
    cfg: &SimConfig,
    horizon: u64,
    stream: u64,
) -> Result<SimulatedPath> {
    cfg.validate()?;
    let space = model.state_space();
    let first = space
        .index_of(cfg.initial_state)
        .map_err(|_| Error::InvalidInitialState(cfg.initial_state))?;
    let mut index_cfg = *model.index_config();
    if let Some(u) = cfg.initial_index {
        index_cfg.initial_index = u;
    }
    let reps = space.representative_values();
    let levels = model.index_levels();
    let mut rng = PathRng::new(cfg.seed, stream);
    let mut eval = IndexEvaluator::new(&index_cfg);

    let mut states = vec![cfg.initial_state];
    let mut times = vec![0u64];
    let mut index_values = vec![eval.value()];
    let mut fallback_uses = 0u64;
    let mut i = first;
    let mut t = 0u64;
    loop {
        let slot = levels.slot(eval.value());
        let (row, fell) = model.resolved_row(i, slot).ok_or(Error::MissingCell {
            state: i as u16 + 1,
            level: slot + 1,
        })?;
        if fell {
            if !cfg.allow_fallback {
                return Err(Error::MissingCell {
                    state: i as u16 + 1,
                    level: slot + 1,
                });
            }
            fallback_uses += 1;
        }
        let j = row.sample_target(rng.uniform());
        let w = row
            .sojourn(j)
            .expect("reachable target has a sojourn law")
            .sample(rng.uniform()) as u64;
        t += w;
        let u = eval.push(reps[i], w);
        states.push(j as u16 + 1);
        times.push(t);
        index_values.push(u);
        i = j;
        if t >= horizon {
            break;
        }
    }
    let transitions = states.len() as u64 - 1;
    Ok(SimulatedPath {
        trajectory: Trajectory {
            chain: JumpChain { states, times },
            index_values,
        },
        fallback_uses,
        transitions,
    })
}

/// Simulates one trajectory on `[0, horizon)` using stream 0.
pub fn simulate_path(model: &WismcModel, cfg: &SimConfig) -> Result<SimulatedPath> {
    run_path(model, cfg, cfg.horizon, 0)
}

/// Simulates one trajectory on a given random stream.
pub fn simulate_path_on_stream(
    model: &WismcModel,
    cfg: &SimConfig,
    stream: u64,
) -> Result<SimulatedPath> {
    run_path(model, cfg, cfg.horizon, stream)
}

/// `Z(t)` for `t = 0 .. horizon-1`; the last visited state extends to the
/// horizon when the chain ends early.
pub fn expand_to_minutes(chain: &JumpChain, horizon: u64) -> Result<Vec<u16>> {
    if horizon == 0 {
        return Err(Error::HorizonBeforeOrigin);
    }
    if chain.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut out = Vec::with_capacity(horizon as usize);
    for (n, &state) in chain.states.iter().enumerate() {
        let start = chain.times[n].min(horizon);
        let end = chain
            .times
            .get(n + 1)
            .copied()
            .unwrap_or(horizon)
            .min(horizon);
        out.extend(std::iter::repeat_n(state, (end - start) as usize));
        if end == horizon {
            break;
        }
    }
    Ok(out)
}

/// Per-minute labels and returns of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    pub labels: Vec<u16>,
    pub returns: Vec<f64>,
    pub fallback_uses: u64,
}

fn series_on_stream(model: &WismcModel, cfg: &SimConfig, stream: u64) -> Result<PathSeries> {
    let total = cfg.horizon + cfg.burn_in;
    let path = run_path(model, cfg, total, stream)?;
    let mut labels = expand_to_minutes(&path.trajectory.chain, total)?;
    labels.drain(..cfg.burn_in as usize);
    let reps = model.state_space().representative_values();
    let returns = labels.iter().map(|&l| reps[l as usize - 1]).collect();
    Ok(PathSeries {
        labels,
        returns,
        fallback_uses: path.fallback_uses,
    })
}

/// Per-minute return series of length `horizon` (after burn-in), stream 0.
pub fn simulate_returns(model: &WismcModel, cfg: &SimConfig) -> Result<Vec<f64>> {
    Ok(series_on_stream(model, cfg, 0)?.returns)
}

/// Labels and returns for stream `stream`.
pub fn simulate_series(model: &WismcModel, cfg: &SimConfig, stream: u64) -> Result<PathSeries> {
    series_on_stream(model, cfg, stream)
}

/// `cfg.n_paths` independent series, ordered by path id. Runs on the rayon
/// pool when the `parallel` feature is on.
pub fn simulate_paths(model: &WismcModel, cfg: &SimConfig) -> Result<Vec<PathSeries>> {
    cfg.validate()?;
    par::map_range(cfg.n_paths, |k| series_on_stream(model, cfg, k as u64))
        .into_iter()
        .collect()
}
