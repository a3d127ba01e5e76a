//! Fitting a WISMC model from a per-minute state series.

use std::fmt::Write as _;

use crate::discretize::fit_index_levels;
use crate::error::{Error, Result};
use crate::index::index_at_transitions;
use crate::model::{IndexConfig, IndexLevels, JumpChain, KernelRow, StateSpace, WismcModel};

/// Default guard on the number of observed transitions.
pub const DEFAULT_MIN_TRANSITIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub level_count: usize,
    pub min_transitions: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            level_count: 5,
            min_transitions: DEFAULT_MIN_TRANSITIONS,
        }
    }
}

/// Run-length encodes a label sequence into its jump chain: each run of
/// identical labels becomes one visit starting at the run's first minute.
pub fn build_trajectory(labels: &[u16]) -> Result<JumpChain> {
    let first = *labels.first().ok_or(Error::EmptyInput)?;
    let mut states = vec![first];
    let mut times = vec![0u64];
    for (t, w) in labels.windows(2).enumerate() {
        if w[0] != w[1] {
            states.push(w[1]);
            times.push(t as u64 + 1);
        }
    }
    Ok(JumpChain { states, times })
}

fn check_labels(labels: &[u16], space: &StateSpace) -> Result<()> {
    match labels.iter().find(|&&l| space.index_of(l).is_err()) {
        Some(&bad) => Err(Error::UnknownState(bad)),
        None => Ok(()),
    }
}

/// Fits the kernel: computes `U_n` at every transition, fits index levels on
/// the conditioning values `U_0 .. U_{N-1}`, then counts transitions and
/// sojourns per (state, level, target) cell.
pub fn fit(
    labels: &[u16],
    state_space: &StateSpace,
    index_config: &IndexConfig,
    options: &FitOptions,
) -> Result<WismcModel> {
    fit_inner(
        labels,
        state_space,
        index_config,
        options.min_transitions,
        |u| {
            if options.level_count <= 1 {
                Ok(IndexLevels::single())
            } else {
                fit_index_levels(u, options.level_count)
            }
        },
    )
}

/// As [`fit`] with index levels held fixed instead of fitted.
pub fn fit_with_levels(
    labels: &[u16],
    state_space: &StateSpace,
    index_config: &IndexConfig,
    levels: &IndexLevels,
    min_transitions: usize,
) -> Result<WismcModel> {
    fit_inner(labels, state_space, index_config, min_transitions, |_| {
        Ok(levels.clone())
    })
}

fn fit_inner<F>(
    labels: &[u16],
    space: &StateSpace,
    index_config: &IndexConfig,
    min_transitions: usize,
    make_levels: F,
) -> Result<WismcModel>
where
    F: FnOnce(&[f64]) -> Result<IndexLevels>,
{
    check_labels(labels, space)?;
    index_config.validate()?;
    let chain = build_trajectory(labels)?;
    let transitions = chain.len() - 1;
    if transitions < min_transitions.max(1) {
        return Err(Error::TooFewSamples {
            needed: min_transitions.max(1),
            got: transitions,
        });
    }
    let index = index_at_transitions(&chain, index_config, space.representative_values())?;
    let conditioning = &index.values[..transitions];
    let levels = make_levels(conditioning)?;

    let s = space.size();
    let l = levels.count();
    let mut counts = vec![vec![0u64; s]; s * l];
    let mut sojourns = vec![vec![Vec::<u32>::new(); s]; s * l];
    for n in 0..transitions {
        let i = chain.states[n] as usize - 1;
        let j = chain.states[n + 1] as usize - 1;
        let cell = i * l + levels.slot(conditioning[n]);
        let w = chain.times[n + 1] - chain.times[n];
        counts[cell][j] += 1;
        sojourns[cell][j].push(u32::try_from(w).unwrap_or(u32::MAX));
    }

    let mut rows = Vec::with_capacity(s * l);
    let mut cell_counts = Vec::with_capacity(s * l);
    for (c, soj) in counts.into_iter().zip(&sojourns) {
        let n: u64 = c.iter().sum();
        cell_counts.push(n);
        rows.push(if n == 0 {
            None
        } else {
            Some(KernelRow::from_counts(c, soj)?)
        });
    }
    WismcModel::new(space.clone(), levels, *index_config, rows, cell_counts)
}

/// Ordinary semi-Markov chain estimate, ignoring the index.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainSmc {
    /// `counts[i][j]` transitions from label `i+1` to `j+1`.
    pub counts: Vec<Vec<u64>>,
    /// Observed sojourns in `i+1` before moving to `j+1`.
    pub sojourns: Vec<Vec<Vec<u32>>>,
}

/// Scans the per-minute labels directly, closing a visit each time the
/// label changes. The last (censored) visit is not counted.
pub fn fit_plain_smc(labels: &[u16], states: usize) -> Result<PlainSmc> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = vec![vec![0u64; states]; states];
    let mut sojourns = vec![vec![Vec::new(); states]; states];
    let mut current = labels[0];
    let mut run = 0u32;
    for &label in labels {
        if label as usize == 0 || label as usize > states {
            return Err(Error::UnknownState(label));
        }
        if label == current {
            run += 1;
        } else {
            let (i, j) = (current as usize - 1, label as usize - 1);
            counts[i][j] += 1;
            sojourns[i][j].push(run);
            current = label;
            run = 1;
        }
    }
    Ok(PlainSmc { counts, sojourns })
}

impl PlainSmc {
    /// Single-level WISMC model carrying this kernel.
    pub fn into_model(self, space: &StateSpace, index_config: &IndexConfig) -> Result<WismcModel> {
        let mut rows = Vec::new();
        let mut cell_counts = Vec::new();
        for (c, soj) in self.counts.into_iter().zip(&self.sojourns) {
            let n: u64 = c.iter().sum();
            cell_counts.push(n);
            rows.push(if n == 0 {
                None
            } else {
                Some(KernelRow::from_counts(c, soj)?)
            });
        }
        WismcModel::new(
            space.clone(),
            IndexLevels::single(),
            *index_config,
            rows,
            cell_counts,
        )
    }
}

/// Human-readable table of observations per (state, level) cell.
pub fn occupancy_report(model: &WismcModel) -> String {
    let s = model.state_space().size();
    let l = model.index_levels().count();
    let mut out = String::new();
    let _ = write!(out, "{:>6}", "state");
    for v in 1..=l {
        let _ = write!(out, " {:>9}", format!("level {v}"));
    }
    out.push('\n');
    for i in 0..s {
        let _ = write!(out, "{:>6}", i + 1);
        for v in 0..l {
            let _ = write!(out, " {:>9}", model.cell_counts()[i * l + v]);
        }
        out.push('\n');
    }
    let missing = model.missing_cells();
    if missing > 0 {
        let _ = writeln!(
            out,
            "{missing} empty cell(s) will use the nearest populated level"
        );
    }
    out
}
