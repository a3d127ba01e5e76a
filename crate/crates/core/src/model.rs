//! Core domain types: state spaces, index levels, jump chains and the fitted
//! weighted-indexed semi-Markov kernel.
//!
//! The kernel is stored in factored form: for each (state `i`, index level
//! `v`) cell we keep the embedded transition row `p[i][v][·]` and, for every
//! reachable target `j`, the conditional sojourn distribution
//! `G_ij(v; ·)`. The joint kernel is `Q_ij(v; t) = p[i][v][j] · G_ij(v; t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of the embedded chain must be one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Finite state space of discretized returns. Labels are `1..=s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceDoc", into = "StateSpaceDoc")]
pub struct StateSpace {
    labels: Vec<u16>,
    representative_values: Vec<f64>,
    return_edges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateSpaceDoc {
    labels: Vec<u16>,
    representative_values: Vec<f64>,
    return_edges: Vec<f64>,
}

impl TryFrom<StateSpaceDoc> for StateSpace {
    type Error = Error;
    fn try_from(doc: StateSpaceDoc) -> Result<Self> {
        let space = StateSpace::new(doc.representative_values, doc.return_edges)?;
        if space.labels != doc.labels {
            return Err(Error::InvalidModel("state labels must be 1..=s".into()));
        }
        Ok(space)
    }
}

impl From<StateSpace> for StateSpaceDoc {
    fn from(s: StateSpace) -> Self {
        StateSpaceDoc {
            labels: s.labels,
            representative_values: s.representative_values,
            return_edges: s.return_edges,
        }
    }
}

impl StateSpace {
    /// Builds a state space from representative returns and the `s - 1`
    /// bin edges that produced them.
    pub fn new(representative_values: Vec<f64>, return_edges: Vec<f64>) -> Result<Self> {
        let s = representative_values.len();
        if s < 2 {
            return Err(Error::InvalidModel(
                "state space needs at least two states".into(),
            ));
        }
        if s > u16::MAX as usize {
            return Err(Error::InvalidModel("too many states".into()));
        }
        if !strictly_increasing(&representative_values) {
            return Err(Error::InvalidModel(
                "representative values must be finite and strictly increasing".into(),
            ));
        }
        if return_edges.len() != s - 1 || !strictly_increasing(&return_edges) {
            return Err(Error::InvalidModel(
                "return edges must be s-1 finite strictly increasing values".into(),
            ));
        }
        Ok(StateSpace {
            labels: (1..=s as u16).collect(),
            representative_values,
            return_edges,
        })
    }

    /// Evenly spaced symmetric states `scale * (k - mid)` with midpoint edges.
    pub fn symmetric_grid(states: usize, scale: f64) -> Result<Self> {
        if states < 2 {
            return Err(Error::InvalidModel(
                "state space needs at least two states".into(),
            ));
        }
        let mid = (states as f64 - 1.0) / 2.0;
        let reps: Vec<f64> = (0..states).map(|k| scale * (k as f64 - mid)).collect();
        let edges = reps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        StateSpace::new(reps, edges)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn representative_values(&self) -> &[f64] {
        &self.representative_values
    }

    pub fn return_edges(&self) -> &[f64] {
        &self.return_edges
    }

    pub fn index_of(&self, label: u16) -> Result<usize> {
        if label >= 1 && (label as usize) <= self.size() {
            Ok(label as usize - 1)
        } else {
            Err(Error::UnknownState(label))
        }
    }

    pub fn representative(&self, label: u16) -> Result<f64> {
        Ok(self.representative_values[self.index_of(label)?])
    }

    /// The middle state (lower middle for even sizes).
    pub fn median_label(&self) -> u16 {
        self.size().div_ceil(2) as u16
    }

    /// Squared representative return of the median state.
    pub fn default_initial_index(&self) -> f64 {
        let r = self.representative_values[self.median_label() as usize - 1];
        r * r
    }

    /// Maps a return to its state label.
    pub fn classify(&self, value: f64) -> u16 {
        crate::discretize::bin_of(value, &self.return_edges) as u16 + 1
    }
}

/// Cut points that discretize index values into `count` volatility levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexLevelsDoc", into = "IndexLevelsDoc")]
pub struct IndexLevels {
    edges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct IndexLevelsDoc {
    count: usize,
    edges: Vec<f64>,
}

impl TryFrom<IndexLevelsDoc> for IndexLevels {
    type Error = Error;
    fn try_from(doc: IndexLevelsDoc) -> Result<Self> {
        if doc.count != doc.edges.len() + 1 {
            return Err(Error::InvalidModel(
                "level count does not match edges".into(),
            ));
        }
        IndexLevels::new(doc.edges)
    }
}

impl From<IndexLevels> for IndexLevelsDoc {
    fn from(l: IndexLevels) -> Self {
        IndexLevelsDoc {
            count: l.count(),
            edges: l.edges,
        }
    }
}

impl IndexLevels {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if !strictly_increasing(&edges) {
            return Err(Error::InvalidModel(
                "index level edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(IndexLevels { edges })
    }

    /// A single level covering every index value.
    pub fn single() -> Self {
        IndexLevels { edges: Vec::new() }
    }

    pub fn count(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Level in `1..=count`; values on an edge belong to the lower level.
    #[inline]
    pub fn level(&self, v: f64) -> usize {
        self.slot(v) + 1
    }

    #[inline]
    pub(crate) fn slot(&self, v: f64) -> usize {
        crate::discretize::bin_of(v, &self.edges)
    }

    pub(crate) fn slot_of_level(&self, level: usize) -> Result<usize> {
        if level >= 1 && level <= self.count() {
            Ok(level - 1)
        } else {
            Err(Error::UnknownLevel(level))
        }
    }
}

/// How far back the index looks, in sojourns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Memory {
    Unbounded,
    Window(u32),
}

impl std::fmt::Display for Memory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Memory::Unbounded => f.write_str("unbounded"),
            Memory::Window(m) => write!(f, "{m}"),
        }
    }
}

impl std::str::FromStr for Memory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unbounded") || s.eq_ignore_ascii_case("inf") {
            return Ok(Memory::Unbounded);
        }
        match s.parse::<u32>() {
            Ok(m) if m >= 1 => Ok(Memory::Window(m)),
            _ => Err(Error::InvalidConfig(format!("invalid memory '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub lambda: f64,
    pub memory: Memory,
    pub initial_index: f64,
}

impl IndexConfig {
    pub fn new(lambda: f64, memory: Memory, initial_index: f64) -> Result<Self> {
        let cfg = IndexConfig {
            lambda,
            memory,
            initial_index,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if self.memory == Memory::Window(0) {
            return Err(Error::InvalidConfig("memory must be at least 1".into()));
        }
        if !(self.initial_index >= 0.0 && self.initial_index.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial index must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete distribution on positive integer sojourn times.
///
/// `weights` may be raw counts (fitted models) or probabilities (synthetic
/// models); the CDF is the normalized prefix sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SojournDoc", into = "SojournDoc")]
pub struct SojournDist {
    times: Vec<u32>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SojournDoc {
    times: Vec<u32>,
    weights: Vec<f64>,
}

impl TryFrom<SojournDoc> for SojournDist {
    type Error = Error;
    fn try_from(doc: SojournDoc) -> Result<Self> {
        SojournDist::new(doc.times, doc.weights)
    }
}

impl From<SojournDist> for SojournDoc {
    fn from(d: SojournDist) -> Self {
        SojournDoc {
            times: d.times,
            weights: d.weights,
        }
    }
}

impl SojournDist {
    pub fn new(times: Vec<u32>, weights: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != weights.len() {
            return Err(Error::InvalidModel(
                "sojourn histogram shape mismatch".into(),
            ));
        }
        if times[0] < 1 || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "sojourn times must be strictly increasing integers >= 1".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidModel(
                "sojourn weights must be finite and >= 0".into(),
            ));
        }
        let mut acc = 0.0;
        let prefix: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::InvalidModel("sojourn histogram has no mass".into()));
        }
        let cum = prefix.into_iter().map(|c| c / acc).collect();
        Ok(SojournDist {
            times,
            weights,
            cum,
        })
    }

    pub fn point_mass(t: u32) -> Result<Self> {
        SojournDist::new(vec![t], vec![1.0])
    }

    /// Empirical distribution of observed sojourns.
    pub fn from_samples(samples: &[u32]) -> Result<Self> {
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let mut times = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for t in sorted {
            if times.last() == Some(&t) {
                *weights.last_mut().unwrap() += 1.0;
            } else {
                times.push(t);
                weights.push(1.0);
            }
        }
        SojournDist::new(times, weights)
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `P[W <= t]`.
    pub fn cdf(&self, t: u32) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// Inverse-CDF draw from a uniform `u` on `[0, 1)`.
    #[inline]
    pub fn sample(&self, u: f64) -> u32 {
        let k = self.cum.partition_point(|&c| c <= u);
        self.times[k.min(self.times.len() - 1)]
    }

    pub fn mean(&self) -> f64 {
        let total = self.total_weight();
        self.times
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| t as f64 * w)
            .sum::<f64>()
            / total
    }
}

/// Transition row of one (state, level) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRowDoc", into = "KernelRowDoc")]
pub struct KernelRow {
    p: Vec<f64>,
    sojourn: Vec<Option<SojournDist>>,
    counts: Vec<u64>,
    targets: Vec<usize>,
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelRowDoc {
    p: Vec<f64>,
    counts: Vec<u64>,
    sojourn: Vec<Option<SojournDist>>,
}

impl TryFrom<KernelRowDoc> for KernelRow {
    type Error = Error;
    fn try_from(doc: KernelRowDoc) -> Result<Self> {
        KernelRow::with_counts(doc.p, doc.sojourn, doc.counts)
    }
}

impl From<KernelRow> for KernelRowDoc {
    fn from(r: KernelRow) -> Self {
        KernelRowDoc {
            p: r.p,
            counts: r.counts,
            sojourn: r.sojourn,
        }
    }
}

impl KernelRow {
    pub fn new(p: Vec<f64>, sojourn: Vec<Option<SojournDist>>) -> Result<Self> {
        let counts = vec![0; p.len()];
        KernelRow::with_counts(p, sojourn, counts)
    }

    pub fn with_counts(
        p: Vec<f64>,
        sojourn: Vec<Option<SojournDist>>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if p.len() != sojourn.len() || p.len() != counts.len() {
            return Err(Error::InvalidModel("kernel row shape mismatch".into()));
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidModel(
                "transition probability outside [0, 1]".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidModel(format!("transition row sums to {sum}")));
        }
        let mut targets = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for (j, &pj) in p.iter().enumerate() {
            if pj > 0.0 {
                if sojourn[j].is_none() {
                    return Err(Error::InvalidModel(format!(
                        "missing sojourn distribution for reachable target {}",
                        j + 1
                    )));
                }
                acc += pj;
                targets.push(j);
                cum.push(acc);
            }
        }
        Ok(KernelRow {
            p,
            sojourn,
            counts,
            targets,
            cum,
        })
    }

    /// Row estimated from transition counts and observed sojourns per target.
    pub fn from_counts(counts: Vec<u64>, sojourns: &[Vec<u32>]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidModel("empty kernel row".into()));
        }
        let p = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let dists = sojourns
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    SojournDist::from_samples(s).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        KernelRow::with_counts(p, dists, counts)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sojourn(&self, j: usize) -> Option<&SojournDist> {
        self.sojourn.get(j).and_then(|s| s.as_ref())
    }

    /// Inverse-CDF draw of the next state index.
    #[inline]
    pub fn sample_target(&self, u: f64) -> usize {
        let total = *self.cum.last().expect("row has at least one target");
        let x = u * total;
        let k = self.cum.partition_point(|&c| c <= x);
        self.targets[k.min(self.targets.len() - 1)]
    }
}

/// A fitted or synthetic WISMC model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WismcModel {
    state_space: StateSpace,
    index_levels: IndexLevels,
    index_config: IndexConfig,
    rows: Vec<Option<KernelRow>>,
    cell_counts: Vec<u64>,
    resolved: Vec<Option<usize>>,
}

/// Current JSON schema version for models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    state_space: StateSpace,
    index_levels: IndexLevels,
    index_config: IndexConfig,
    cells: Vec<CellDoc>,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    state: u16,
    level: usize,
    count: u64,
    row: Option<KernelRow>,
}

impl WismcModel {
    /// `rows` and `cell_counts` are laid out state-major: cell `(i, v)` sits
    /// at `i * levels + v` (zero-based).
    pub fn new(
        state_space: StateSpace,
        index_levels: IndexLevels,
        index_config: IndexConfig,
        rows: Vec<Option<KernelRow>>,
        cell_counts: Vec<u64>,
    ) -> Result<Self> {
        index_config.validate()?;
        let s = state_space.size();
        let l = index_levels.count();
        if rows.len() != s * l || cell_counts.len() != s * l {
            return Err(Error::InvalidModel("kernel table shape mismatch".into()));
        }
        for (cell, row) in rows.iter().enumerate() {
            let i = cell / l;
            if let Some(row) = row {
                if row.p.len() != s {
                    return Err(Error::InvalidModel("kernel row length mismatch".into()));
                }
                if row.p[i] != 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "self-transition probability for state {} must be zero",
                        i + 1
                    )));
                }
            }
        }
        let resolved = (0..s * l)
            .map(|cell| {
                let (i, v) = (cell / l, cell % l);
                nearest_populated(&rows, i, v, l)
            })
            .collect();
        Ok(WismcModel {
            state_space,
            index_levels,
            index_config,
            rows,
            cell_counts,
            resolved,
        })
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.state_space
    }

    pub fn index_levels(&self) -> &IndexLevels {
        &self.index_levels
    }

    pub fn index_config(&self) -> &IndexConfig {
        &self.index_config
    }

    pub fn cell_counts(&self) -> &[u64] {
        &self.cell_counts
    }

    pub fn cell_count(&self, label: u16, level: usize) -> Result<u64> {
        Ok(self.cell_counts[self.cell_index(label, level)?])
    }

    /// The stored row of a cell, `None` if the cell was never observed.
    pub fn row(&self, label: u16, level: usize) -> Result<Option<&KernelRow>> {
        Ok(self.rows[self.cell_index(label, level)?].as_ref())
    }

    /// Row used for cell `(i, v)` after the nearest-level fallback, with a
    /// flag telling whether the fallback was taken.
    #[inline]
    pub(crate) fn resolved_row(&self, i: usize, slot: usize) -> Option<(&KernelRow, bool)> {
        let cell = i * self.index_levels.count() + slot;
        self.resolved[cell].map(|v| {
            let row = self.rows[i * self.index_levels.count() + v]
                .as_ref()
                .expect("resolved cell is populated");
            (row, v != slot)
        })
    }

    fn cell_index(&self, label: u16, level: usize) -> Result<usize> {
        let i = self.state_space.index_of(label)?;
        let v = self.index_levels.slot_of_level(level)?;
        Ok(i * self.index_levels.count() + v)
    }

    fn lookup_row(&self, label: u16, level: usize) -> Result<&KernelRow> {
        let i = self.state_space.index_of(label)?;
        let v = self.index_levels.slot_of_level(level)?;
        self.resolved_row(i, v)
            .map(|(r, _)| r)
            .ok_or(Error::MissingCell {
                state: label,
                level,
            })
    }

    /// `p_ij(v)` of the embedded chain (after level fallback).
    pub fn transition_probability(&self, i: u16, level: usize, j: u16) -> Result<f64> {
        let row = self.lookup_row(i, level)?;
        Ok(row.p[self.state_space.index_of(j)?])
    }

    /// Conditional sojourn CDF `G_ij(v; t)`; one whenever `p_ij(v) = 0`.
    pub fn sojourn_cdf_lookup(&self, i: u16, j: u16, level: usize, t: u32) -> Result<f64> {
        let row = self.lookup_row(i, level)?;
        let jj = self.state_space.index_of(j)?;
        if row.p[jj] == 0.0 {
            return Ok(1.0);
        }
        Ok(row.sojourn(jj).map_or(1.0, |d| d.cdf(t)))
    }

    /// Sojourn CDF in state `i` regardless of target: `H_i(v; t)`.
    pub fn sojourn_marginal(&self, i: u16, level: usize, t: u32) -> Result<f64> {
        let row = self.lookup_row(i, level)?;
        Ok(row
            .targets
            .iter()
            .map(|&j| row.p[j] * row.sojourn(j).map_or(1.0, |d| d.cdf(t)))
            .sum())
    }

    /// Joint kernel `Q_ij(v; t) = p_ij(v) · G_ij(v; t)`.
    pub fn kernel(&self, i: u16, j: u16, level: usize, t: u32) -> Result<f64> {
        let row = self.lookup_row(i, level)?;
        let jj = self.state_space.index_of(j)?;
        let p = row.p[jj];
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok(p * row.sojourn(jj).map_or(1.0, |d| d.cdf(t)))
    }

    /// Transition counts summed over index levels, `[i][j]`.
    pub fn collapsed_counts(&self) -> Vec<Vec<u64>> {
        let s = self.state_space.size();
        let l = self.index_levels.count();
        let mut out = vec![vec![0u64; s]; s];
        for (cell, row) in self.rows.iter().enumerate() {
            if let Some(row) = row {
                for (j, &c) in row.counts.iter().enumerate() {
                    out[cell / l][j] += c;
                }
            }
        }
        out
    }

    /// Number of cells with no observations and no stored row.
    pub fn missing_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }

    /// Checks every stored invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<()> {
        let s = self.state_space.size();
        for (cell, row) in self.rows.iter().enumerate() {
            let Some(row) = row else { continue };
            let i = cell / self.index_levels.count();
            let sum: f64 = row.p.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.p[i] != 0.0 || row.p.len() != s {
                return Err(Error::InvalidModel(format!("row {cell} is not stochastic")));
            }
            for j in 0..s {
                if let Some(d) = row.sojourn(j) {
                    if d.cum.windows(2).any(|w| w[0] > w[1]) || *d.cum.last().unwrap() != 1.0 {
                        return Err(Error::InvalidModel(format!(
                            "sojourn CDF of cell {cell} target {} malformed",
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let l = self.index_levels.count();
        let cells = self
            .rows
            .iter()
            .enumerate()
            .map(|(cell, row)| CellDoc {
                state: (cell / l + 1) as u16,
                level: cell % l + 1,
                count: self.cell_counts[cell],
                row: row.clone(),
            })
            .collect();
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            state_space: self.state_space.clone(),
            index_levels: self.index_levels.clone(),
            index_config: self.index_config,
            cells,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model format_version {}",
                doc.format_version
            )));
        }
        let s = doc.state_space.size();
        let l = doc.index_levels.count();
        if doc.cells.len() != s * l {
            return Err(Error::InvalidModel("cell table has the wrong size".into()));
        }
        let mut rows = vec![None; s * l];
        let mut counts = vec![0; s * l];
        let mut seen = vec![false; s * l];
        for c in doc.cells {
            let i = doc.state_space.index_of(c.state)?;
            let v = doc.index_levels.slot_of_level(c.level)?;
            let cell = i * l + v;
            if seen[cell] {
                return Err(Error::InvalidModel("duplicate cell".into()));
            }
            seen[cell] = true;
            rows[cell] = c.row;
            counts[cell] = c.count;
        }
        WismcModel::new(
            doc.state_space,
            doc.index_levels,
            doc.index_config,
            rows,
            counts,
        )
    }
}

fn nearest_populated(rows: &[Option<KernelRow>], i: usize, v: usize, l: usize) -> Option<usize> {
    if rows[i * l + v].is_some() {
        return Some(v);
    }
    for d in 1..l {
        if v >= d && rows[i * l + v - d].is_some() {
            return Some(v - d);
        }
        if v + d < l && rows[i * l + v + d].is_some() {
            return Some(v + d);
        }
    }
    None
}

/// Embedded jump chain: visited states and the integer times they were entered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumpChain {
    pub states: Vec<u16>,
    pub times: Vec<u64>,
}

impl JumpChain {
    pub fn new(states: Vec<u16>, times: Vec<u64>) -> Result<Self> {
        let chain = JumpChain { states, times };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if self.states.len() != self.times.len() {
            return Err(Error::InvalidModel(
                "states and times differ in length".into(),
            ));
        }
        if self.times[0] != 0 || self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "jump times must start at 0 and strictly increase".into(),
            ));
        }
        if self.states.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("consecutive states must differ".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sojourn lengths `T_{n+1} - T_n` of the completed visits.
    pub fn sojourns(&self) -> impl Iterator<Item = u64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    /// `N(t) = sup{n : T_n <= t}`.
    pub fn count_until(&self, t: u64) -> usize {
        self.times.partition_point(|&x| x <= t) - 1
    }
}

/// Jump chain with the index value at each transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chain: JumpChain,
    pub index_values: Vec<f64>,
}

impl Trajectory {
    pub fn states(&self) -> &[u16] {
        &self.chain.states
    }

    pub fn times(&self) -> &[u64] {
        &self.chain.times
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if self.index_values.len() != self.chain.len() {
            return Err(Error::InvalidModel("index series length mismatch".into()));
        }
        if self.index_values.iter().any(|u| !(*u >= 0.0)) {
            return Err(Error::InvalidModel("negative index value".into()));
        }
        Ok(())
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
}
