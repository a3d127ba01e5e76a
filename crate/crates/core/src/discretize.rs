//! Symmetric return-state bins and volatility-index levels.
//!
//! Quantiles are lower order statistics: the `q`-quantile of `n` sorted
//! values is the element of rank `ceil(q * n)` (1-based). Quantile levels are
//! always rational (`k / d`), so the rank is computed in integers.

use crate::error::{Error, Result};
use crate::model::{IndexLevels, StateSpace};

/// Zero-based bin of `value` given sorted `edges`: bin `k` is
/// `(edges[k-1], edges[k]]`, so a value sitting on an edge falls low.
#[inline]
pub fn bin_of(value: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e < value)
}

/// Lower order-statistic quantile at level `num / den` of sorted data.
pub fn lower_quantile(sorted: &[f64], num: usize, den: usize) -> f64 {
    assert!(!sorted.is_empty() && den > 0 && num <= den);
    let rank = (num * sorted.len()).div_ceil(den).max(1);
    sorted[rank - 1]
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Fitted return bins and the state space they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnBins {
    pub edges: Vec<f64>,
    pub state_space: StateSpace,
}

impl ReturnBins {
    /// Uses fixed `edges`; representative values are in-bin medians of
    /// `training`. Empty bins fall back to their midpoint (or the edge itself
    /// for the two unbounded outer bins).
    pub fn from_edges(edges: Vec<f64>, training: &[f64]) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DegenerateDistribution("bin edges coincide"));
        }
        let s = edges.len() + 1;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); s];
        for &r in training {
            members[bin_of(r, &edges)].push(r);
        }
        let reps: Vec<f64> = members
            .into_iter()
            .enumerate()
            .map(|(k, mut m)| {
                if m.is_empty() {
                    match k {
                        0 => edges[0],
                        k if k == s - 1 => edges[s - 2],
                        k => 0.5 * (edges[k - 1] + edges[k]),
                    }
                } else {
                    m.sort_by(f64::total_cmp);
                    median_sorted(&m)
                }
            })
            .collect();
        let state_space = StateSpace::new(reps, edges.clone())
            .map_err(|_| Error::DegenerateDistribution("representative values not increasing"))?;
        Ok(ReturnBins { edges, state_space })
    }

    pub fn discretize(&self, values: &[f64]) -> Vec<u16> {
        discretize_series(values, &self.edges)
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Symmetric bins: `(s-1)/2` positive cut points at equally spaced quantiles
/// of `|r|`, mirrored about zero. The middle state straddles zero.
pub fn fit_return_bins(returns: &[f64], states: usize) -> Result<ReturnBins> {
    fit_return_bins_with_tick(returns, states, None)
}

/// As [`fit_return_bins`], optionally rounding the positive cut points to
/// the nearest multiple of `tick` (return units) before mirroring.
pub fn fit_return_bins_with_tick(
    returns: &[f64],
    states: usize,
    tick: Option<f64>,
) -> Result<ReturnBins> {
    if states % 2 == 0 {
        return Err(Error::EvenStateCount(states));
    }
    if states < 3 {
        return Err(Error::InvalidConfig(
            "at least three return states required".into(),
        ));
    }
    if returns.len() < 10 * states {
        return Err(Error::TooFewSamples {
            needed: 10 * states,
            got: returns.len(),
        });
    }
    let abs: Vec<f64> = sorted_copy(&returns.iter().map(|r| r.abs()).collect::<Vec<_>>());
    let half = (states - 1) / 2;
    let mut cuts: Vec<f64> = (1..=half)
        .map(|k| lower_quantile(&abs, k, half + 1))
        .collect();
    if let Some(tick) = tick {
        if !(tick > 0.0) {
            return Err(Error::InvalidConfig("tick must be positive".into()));
        }
        for c in &mut cuts {
            *c = (*c / tick).round() * tick;
        }
    }
    if cuts[0] <= 0.0 || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateDistribution(
            "return bin edges would coincide",
        ));
    }
    let edges: Vec<f64> = cuts
        .iter()
        .rev()
        .map(|c| -c)
        .chain(cuts.iter().copied())
        .collect();
    ReturnBins::from_edges(edges, returns)
}

/// Label `k` (1-based) iff `value` lies in `(edge_{k-1}, edge_k]`.
pub fn discretize_series(values: &[f64], edges: &[f64]) -> Vec<u16> {
    values
        .iter()
        .map(|&v| bin_of(v, edges) as u16 + 1)
        .collect()
}

/// Quantile levels at `k / count` without a sample-size guard.
pub fn quantile_levels(values: &[f64], count: usize) -> Result<IndexLevels> {
    if count < 2 {
        return Err(Error::InvalidConfig(
            "at least two index levels required".into(),
        ));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sorted = sorted_copy(values);
    let edges: Vec<f64> = (1..count)
        .map(|k| lower_quantile(&sorted, k, count))
        .collect();
    if edges.windows(2).any(|w| w[0] >= w[1]) || sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateDistribution(
            "index level edges would coincide",
        ));
    }
    IndexLevels::new(edges)
}

/// Volatility levels at the `k / count` quantiles of training index values.
pub fn fit_index_levels(values: &[f64], count: usize) -> Result<IndexLevels> {
    if values.len() < 10 * count {
        return Err(Error::TooFewSamples {
            needed: 10 * count,
            got: values.len(),
        });
    }
    quantile_levels(values, count)
}
