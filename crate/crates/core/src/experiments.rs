//! Validation experiments: synthetic ground-truth models, (λ, m) sweeps that
//! minimize the squared-return ACF mismatch, and model-vs-data reports.

use serde::{Deserialize, Serialize};

use crate::discretize::{quantile_levels, ReturnBins};
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};
use crate::model::{
    IndexConfig, IndexLevels, KernelRow, Memory, SojournDist, StateSpace, WismcModel,
};
use crate::par;
use crate::rng::{derive_seed, PathRng};
use crate::simulate::{simulate_path_on_stream, simulate_series, SimConfig};
use crate::stats::{acf_raw, acf_squared, fpt_distribution, mse_acf, AcfCurve, FptSample};

/// Parameters of a synthetic ground-truth model.
///
/// The generated kernel is mirror symmetric: transition weights depend only
/// on the distance of the source and target from the zero state, and a state
/// never jumps to its own mirror image. Off-center states leave after one
/// minute unless `off_center_persistence > 0`, so returns carry no linear
/// autocorrelation while squared returns cluster through the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub states: usize,
    pub levels: usize,
    pub lambda: f64,
    pub memory: Memory,
    /// Level dependence; 0 makes every level share the same kernel.
    pub dependence: f64,
    pub kernel_seed: u64,
    /// Spacing between neighbouring representative returns.
    pub return_scale: f64,
    /// Geometric continuation probability for non-zero return states.
    pub off_center_persistence: f64,
    /// Length of the pilot run used to place the level edges.
    pub calibration_minutes: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            states: 5,
            levels: 5,
            lambda: 0.97,
            memory: Memory::Unbounded,
            dependence: 1.0,
            kernel_seed: 1,
            return_scale: 1e-3,
            off_center_persistence: 0.0,
            calibration_minutes: 400_000,
        }
    }
}

// Strength of the level tilt on transition weights and on middle-state
// waiting times, and the extra weight on returning to the zero state.
const TRANSITION_TILT: f64 = 0.8;
const SOJOURN_TILT: f64 = 0.3;
const MIDDLE_PULL: f64 = 1.5;
const MAX_SOJOURN: u32 = 400;

/// Geometric law on `{1, 2, ...}` with continuation probability `c`,
/// truncated at [`MAX_SOJOURN`] with the tail folded into the last point.
fn geometric_pmf(c: f64) -> Vec<f64> {
    let mut pmf = Vec::new();
    let mut mass = 1.0 - c;
    let mut left = 1.0;
    while (pmf.len() as u32) < MAX_SOJOURN {
        if left <= 1e-13 {
            break;
        }
        let m = mass.min(left);
        pmf.push(m);
        left -= m;
        mass *= c;
    }
    if left > 0.0 {
        if let Some(last) = pmf.last_mut() {
            *last += left;
        }
    }
    pmf
}

fn mixture(parts: &[(f64, f64)]) -> Result<SojournDist> {
    let pmfs: Vec<Vec<f64>> = parts.iter().map(|&(_, c)| geometric_pmf(c)).collect();
    let len = pmfs.iter().map(Vec::len).max().unwrap_or(1);
    let mut weights = vec![0.0; len];
    for ((w, _), pmf) in parts.iter().zip(&pmfs) {
        for (k, m) in pmf.iter().enumerate() {
            weights[k] += w * m;
        }
    }
    let (times, weights): (Vec<u32>, Vec<f64>) = weights
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(k, w)| (k as u32 + 1, w))
        .unzip();
    SojournDist::new(times, weights)
}

struct KernelDraw {
    /// Base transition weight per (source class, target class).
    base: Vec<Vec<f64>>,
    /// (mixture weight, fast continuation, slow continuation) per target class.
    sojourn: Vec<(f64, f64, f64)>,
}

fn build_model(spec: &SynthSpec, draw: &KernelDraw, levels: IndexLevels) -> Result<WismcModel> {
    let s = spec.states;
    let mid = (s - 1) / 2;
    let space = StateSpace::symmetric_grid(s, spec.return_scale)?;
    let l = levels.count();
    let class = |k: usize| k.abs_diff(mid);
    let extremeness = |k: usize| class(k) as f64 / mid as f64;
    let mut rows = Vec::with_capacity(s * l);
    for i in 0..s {
        for v in 0..l {
            let x = if l == 1 {
                0.5
            } else {
                v as f64 / (l - 1) as f64
            };
            let tilt = spec.dependence * (2.0 * x - 1.0);
            let mut p = vec![0.0; s];
            for (j, pj) in p.iter_mut().enumerate() {
                if j == i || j == s - 1 - i {
                    continue;
                }
                let pull = if i != mid && j == mid {
                    MIDDLE_PULL
                } else {
                    1.0
                };
                *pj = pull
                    * draw.base[class(i)][class(j)]
                    * (TRANSITION_TILT * tilt * (2.0 * extremeness(j) - 1.0)).exp();
            }
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= total);
            let fix: f64 = 1.0 - p.iter().sum::<f64>();
            if let Some(k) = p.iter().position(|&x| x > 0.0) {
                p[k] += fix;
            }
            let sojourn = (0..s)
                .map(|j| {
                    if p[j] == 0.0 {
                        return Ok(None);
                    }
                    let dist = if i == mid {
                        let (w, fast, slow) = draw.sojourn[class(j)];
                        let stretch = (SOJOURN_TILT * tilt).exp();
                        mixture(&[(w, fast.powf(stretch)), (1.0 - w, slow.powf(stretch))])?
                    } else {
                        mixture(&[(1.0, spec.off_center_persistence)])?
                    };
                    Ok(Some(dist))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(Some(KernelRow::new(p, sojourn)?));
        }
    }
    let index = IndexConfig::new(spec.lambda, spec.memory, space.default_initial_index())?;
    WismcModel::new(space, levels, index, rows, vec![0; s * l])
}

/// Random but valid ground-truth model. Level edges sit at the quantiles of
/// the transition-time index values of a pilot run of the level-neutral
/// kernel; with positive dependence the outer levels end up busier.
pub fn make_synthetic_truth(spec: &SynthSpec) -> Result<WismcModel> {
    if spec.states < 3 || spec.states % 2 == 0 {
        return Err(Error::InvalidConfig(
            "synthetic models need an odd state count >= 3".into(),
        ));
    }
    if spec.levels == 0 || !(spec.dependence >= 0.0) || !(spec.return_scale > 0.0) {
        return Err(Error::InvalidConfig(
            "invalid synthetic model parameters".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.off_center_persistence) {
        return Err(Error::InvalidConfig(
            "persistence must lie in [0, 1)".into(),
        ));
    }
    let mid = (spec.states - 1) / 2;
    let mut rng = PathRng::new(spec.kernel_seed, 0x5EED);
    let base = (0..=mid)
        .map(|_| (0..=mid).map(|_| 0.5 + rng.uniform()).collect())
        .collect();
    let sojourn = (0..=mid)
        .map(|_| {
            (
                0.3 + 0.4 * rng.uniform(),
                0.5 + 0.15 * rng.uniform(),
                0.85 + 0.07 * rng.uniform(),
            )
        })
        .collect();
    let draw = KernelDraw { base, sojourn };

    if spec.levels == 1 {
        return build_model(spec, &draw, IndexLevels::single());
    }
    // edges come from the level-neutral kernel, so the pilot does not
    // depend on the edges it is used to place
    let neutral = build_model(
        &SynthSpec {
            dependence: 0.0,
            ..spec.clone()
        },
        &draw,
        IndexLevels::single(),
    )?;
    let cfg = SimConfig::for_model(
        &neutral,
        spec.calibration_minutes.max(1000),
        derive_seed(spec.kernel_seed, &[0xCA1B]),
    );
    let path = simulate_path_on_stream(&neutral, &cfg, 0)?;
    let u = &path.trajectory.index_values;
    let levels = quantile_levels(&u[..u.len() - 1], spec.levels)?;
    build_model(spec, &draw, levels)
}

/// Settings for a (λ, m) sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub memories: Vec<Memory>,
    pub level_count: usize,
    pub min_transitions: usize,
    pub seed: u64,
    pub tau_max: usize,
    pub replicates: usize,
    pub burn_in: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambdas: default_lambda_grid(),
            memories: vec![
                Memory::Window(10),
                Memory::Window(50),
                Memory::Window(100),
                Memory::Window(500),
                Memory::Unbounded,
            ],
            level_count: 5,
            min_transitions: crate::estimation::DEFAULT_MIN_TRANSITIONS,
            seed: 0,
            tau_max: crate::stats::DEFAULT_TAU_MAX,
            replicates: 1,
            burn_in: 0,
        }
    }
}

/// `0.90, 0.92, ..., 1.00`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=5).map(|k| (90 + 2 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub memory: Memory,
    /// Mean MSE over replicates; `None` when the cell failed.
    pub mse: Option<f64>,
    pub replicate_mse: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_cell(&self) -> Option<&SweepCell> {
        self.best.map(|k| &self.cells[k])
    }
}

fn memory_word(m: Memory) -> u64 {
    match m {
        Memory::Unbounded => u64::MAX,
        Memory::Window(w) => w as u64,
    }
}

/// Seed for one sweep cell replicate.
pub fn cell_seed(master: u64, lambda: f64, memory: Memory, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[lambda.to_bits(), memory_word(memory), replicate as u64],
    )
}

/// Fits the model at each (λ, m), simulates a series as long as the data
/// and scores the squared-return ACF against the data's. Cell failures are
/// recorded, not propagated.
pub fn sweep(data: &[f64], bins: &ReturnBins, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.lambdas.is_empty() || cfg.memories.is_empty() || cfg.replicates == 0 {
        return Err(Error::InvalidConfig("sweep grids must be non-empty".into()));
    }
    let labels = bins.discretize(data);
    let target = acf_squared(data, cfg.tau_max)?;
    let grid: Vec<(f64, Memory)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| cfg.memories.iter().map(move |&m| (l, m)))
        .collect();
    let space = &bins.state_space;
    let cells = par::map_slice(&grid, |&(lambda, memory)| {
        let run = || -> Result<Vec<f64>> {
            let index = IndexConfig::new(lambda, memory, space.default_initial_index())?;
            let opts = FitOptions {
                level_count: cfg.level_count,
                min_transitions: cfg.min_transitions,
            };
            let model = fit(&labels, space, &index, &opts)?;
            (0..cfg.replicates)
                .map(|r| {
                    let mut sim = SimConfig::new(
                        data.len() as u64,
                        cell_seed(cfg.seed, lambda, memory, r),
                        labels[0],
                    );
                    sim.burn_in = cfg.burn_in;
                    let series = simulate_series(&model, &sim, 0)?;
                    mse_acf(&target, &acf_squared(&series.returns, cfg.tau_max)?)
                })
                .collect()
        };
        match run() {
            Ok(reps) => SweepCell {
                lambda,
                memory,
                mse: Some(reps.iter().sum::<f64>() / reps.len() as f64),
                replicate_mse: reps,
                error: None,
            },
            Err(e) => SweepCell {
                lambda,
                memory,
                mse: None,
                replicate_mse: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    });
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.mse.map(|m| (k, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k);
    Ok(SweepResult { cells, best })
}

/// Spread of the ACF MSE between independent resimulations of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Simulates `2 * pairs` fresh series of length `len` and returns the
/// squared-ACF MSE of each pair.
pub fn noise_floor(
    model: &WismcModel,
    base: &SimConfig,
    len: u64,
    tau_max: usize,
    pairs: usize,
) -> Result<NoiseFloor> {
    if pairs == 0 {
        return Err(Error::InvalidConfig(
            "noise floor needs at least one pair".into(),
        ));
    }
    let mut cfg = base.clone();
    cfg.horizon = len;
    cfg.seed = derive_seed(base.seed, &[0x0F1E]);
    let curves = par::map_range(2 * pairs, |k| {
        let s = simulate_series(model, &cfg, k as u64)?;
        acf_squared(&s.returns, tau_max)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let samples = curves
        .chunks(2)
        .map(|c| mse_acf(&c[0], &c[1]))
        .collect::<Result<Vec<_>>>()?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let max = samples.iter().copied().fold(0.0, f64::max);
    Ok(NoiseFloor { samples, mean, max })
}

/// Model-vs-data comparison bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub length: usize,
    pub seed: u64,
    pub tau_max: usize,
    pub rho: f64,
    pub acf_raw_data: Option<AcfCurve>,
    pub acf_raw_sim: Option<AcfCurve>,
    pub acf_squared_data: Option<AcfCurve>,
    pub acf_squared_sim: Option<AcfCurve>,
    pub fpt_data: FptSample,
    pub fpt_sim: FptSample,
    pub mse_squared: Option<f64>,
    pub mse_raw: Option<f64>,
    pub fallback_uses: u64,
    pub missing_cells: usize,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Simulates one series as long as `data` and collects ACFs, FPT
/// histograms and the ACF mismatch. Curves that are undefined for a series
/// (zero variance) are reported as absent.
pub fn compare_report(
    data: &[f64],
    model: &WismcModel,
    cfg: &SimConfig,
    tau_max: usize,
    rho: f64,
    max_wait: usize,
) -> Result<Report> {
    let mut sim_cfg = cfg.clone();
    sim_cfg.horizon = data.len() as u64;
    let sim = simulate_series(model, &sim_cfg, 0)?;
    let ok = |r: Result<AcfCurve>| -> Result<Option<AcfCurve>> {
        match r {
            Ok(c) => Ok(Some(c)),
            Err(Error::DegenerateVariance) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let acf_raw_data = ok(acf_raw(data, tau_max))?;
    let acf_raw_sim = ok(acf_raw(&sim.returns, tau_max))?;
    let acf_squared_data = ok(acf_squared(data, tau_max))?;
    let acf_squared_sim = ok(acf_squared(&sim.returns, tau_max))?;
    let mse = |a: &Option<AcfCurve>, b: &Option<AcfCurve>| match (a, b) {
        (Some(a), Some(b)) => mse_acf(a, b).map(Some),
        _ => Ok(None),
    };
    Ok(Report {
        format_version: REPORT_FORMAT_VERSION,
        length: data.len(),
        seed: cfg.seed,
        tau_max,
        rho,
        mse_squared: mse(&acf_squared_data, &acf_squared_sim)?,
        mse_raw: mse(&acf_raw_data, &acf_raw_sim)?,
        acf_raw_data,
        acf_raw_sim,
        acf_squared_data,
        acf_squared_sim,
        fpt_data: fpt_distribution(data, rho, max_wait)?,
        fpt_sim: fpt_distribution(&sim.returns, rho, max_wait)?,
        fallback_uses: sim.fallback_uses,
        missing_cells: model.missing_cells(),
    })
}
