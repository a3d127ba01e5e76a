use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use wismc::discretize::{fit_return_bins_with_tick, ReturnBins};
use wismc::estimation::{build_trajectory, fit as fit_model, occupancy_report, FitOptions};
use wismc::experiments::{self, SweepConfig, SynthSpec};
use wismc::index::index_at_transitions;
use wismc::ingestion::{parse_ticks, session_returns, DailySchedule};
use wismc::simulate::{simulate_paths, simulate_series, SimConfig};
use wismc::stats::{acf_raw, acf_squared, fpt_distribution, AcfCurve, FptSample};
use wismc::{IndexConfig, Memory, WismcModel};

use crate::error::{CliError, CliResult};
use crate::io::{
    csv_bytes, ensure_dir, json_bytes, num, open, read_model, read_returns, write_atomic,
};
use crate::{AnalyzeArgs, FitArgs, IngestArgs, ReportArgs, SimulateArgs, SweepArgs, SynthArgs};

const FORMAT_VERSION: u32 = 1;

pub fn ingest(a: IngestArgs) -> CliResult<()> {
    let ticks =
        parse_ticks(open(&a.ticks)?).map_err(|e| CliError::data(&a.ticks, e.to_string()))?;
    let ticks = match &a.schedule {
        Some(_) if ticks.has_sessions() => {
            return Err(CliError::ConflictingFlags(
                "--schedule given but the tick file has a session column".into(),
            ))
        }
        Some(s) => ticks.with_schedule(&s.parse::<DailySchedule>()?),
        None => ticks,
    };
    let sessions = session_returns(&ticks, a.step)?;
    let rows = sessions.iter().flat_map(|r| {
        r.values
            .iter()
            .enumerate()
            .map(move |(k, v)| vec![r.time_of(k).to_string(), num(*v)])
    });
    write_atomic(&a.out, &csv_bytes(&["t", "return"], rows)?)?;
    let n: usize = sessions.iter().map(|s| s.len()).sum();
    println!("{n} returns from {} session(s)", sessions.len());
    Ok(())
}

fn bins_for(
    data: &[f64],
    states: usize,
    bins_from: Option<&Path>,
    tick: Option<f64>,
) -> CliResult<ReturnBins> {
    match bins_from {
        Some(p) => {
            let m = read_model(p)?;
            Ok(ReturnBins::from_edges(
                m.state_space().return_edges().to_vec(),
                data,
            )?)
        }
        None => Ok(fit_return_bins_with_tick(data, states, tick)?),
    }
}

fn edge_table(bins: &ReturnBins) -> String {
    let reps = bins.state_space.representative_values();
    let mut out = format!(
        "{:>6} {:>14} {:>14} {:>14}\n",
        "state", "lower", "upper", "value"
    );
    for (k, r) in reps.iter().enumerate() {
        let lo = if k == 0 {
            "-inf".to_string()
        } else {
            format!("{:.6e}", bins.edges[k - 1])
        };
        let hi = bins
            .edges
            .get(k)
            .map_or("+inf".to_string(), |e| format!("{e:.6e}"));
        let _ = writeln!(out, "{:>6} {lo:>14} {hi:>14} {:>14.6e}", k + 1, r);
    }
    out
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    IndexConfig::new(a.lambda, a.memory, a.initial_index.unwrap_or(0.0))?;
    let data = read_returns(&a.returns)?;
    let bins = bins_for(&data, a.states, a.bins_from.as_deref(), a.tick)?;
    let labels = bins.discretize(&data);
    let space = &bins.state_space;
    let u0 = a
        .initial_index
        .unwrap_or_else(|| space.default_initial_index());
    let index = IndexConfig::new(a.lambda, a.memory, u0)?;
    let opts = FitOptions {
        level_count: a.levels,
        min_transitions: a.min_transitions,
    };
    let model = fit_model(&labels, space, &index, &opts)?;
    write_atomic(&a.out, model.to_json()?.as_bytes())?;
    print!("{}", edge_table(&bins));
    println!("index level edges: {:?}", model.index_levels().edges());
    print!("{}", occupancy_report(&model));
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let model = read_model(&a.model)?;
    let mut cfg = SimConfig::for_model(&model, a.horizon, a.seed);
    if let Some(s) = a.initial_state {
        cfg.initial_state = s;
    }
    cfg.initial_index = a.initial_index;
    cfg.n_paths = a.paths;
    cfg.burn_in = a.burn_in;
    cfg.allow_fallback = !a.no_fallback;
    let paths = simulate_paths(&model, &cfg)?;
    ensure_dir(&a.out)?;
    let mut fallback = 0;
    for (k, p) in paths.iter().enumerate() {
        let rows = p
            .labels
            .iter()
            .zip(&p.returns)
            .enumerate()
            .map(|(t, (l, r))| vec![t.to_string(), l.to_string(), num(*r)]);
        let bytes = csv_bytes(&["t", "state", "return"], rows)?;
        write_atomic(&a.out.join(format!("path_{k}.csv")), &bytes)?;
        fallback += p.fallback_uses;
    }
    println!(
        "{} path(s) of {} minutes, {fallback} fallback lookup(s)",
        paths.len(),
        a.horizon
    );
    Ok(())
}

fn acf_csv(c: &AcfCurve) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["lag", "acf"],
        c.lags
            .iter()
            .zip(&c.values)
            .map(|(l, v)| vec![l.to_string(), num(*v)]),
    )
}

/// `tau,count,censored,pdf,cdf`; `censored` counts starts still waiting
/// after `tau` minutes.
fn fpt_csv(f: &FptSample) -> CliResult<Vec<u8>> {
    let pdf = f.pdf();
    let cdf = f.cdf();
    let mut waiting = f.starts();
    let rows = f.counts.iter().enumerate().map(|(k, &c)| {
        waiting -= c;
        vec![
            (k + 1).to_string(),
            c.to_string(),
            waiting.to_string(),
            num(pdf[k]),
            num(cdf[k]),
        ]
    });
    csv_bytes(
        &["tau", "count", "censored", "pdf", "cdf"],
        rows.collect::<Vec<_>>(),
    )
}

#[derive(Serialize)]
struct AnalyzeSummary {
    format_version: u32,
    length: usize,
    tau_max: usize,
    rho: f64,
    max_wait: usize,
    fpt_starts: u64,
    fpt_censored: u64,
}

pub fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let data = read_returns(&a.returns)?;
    let raw = acf_raw(&data, a.tau_max)?;
    let sq = acf_squared(&data, a.tau_max)?;
    let fpt = fpt_distribution(&data, a.rho, a.max_wait)?;
    ensure_dir(&a.out)?;
    write_atomic(&a.out.join("acf_raw.csv"), &acf_csv(&raw)?)?;
    write_atomic(&a.out.join("acf_squared.csv"), &acf_csv(&sq)?)?;
    write_atomic(&a.out.join("fpt.csv"), &fpt_csv(&fpt)?)?;
    if let Some(mp) = &a.model {
        let model = read_model(mp)?;
        let space = model.state_space();
        let labels: Vec<u16> = data.iter().map(|&r| space.classify(r)).collect();
        let chain = build_trajectory(&labels)?;
        let idx =
            index_at_transitions(&chain, model.index_config(), space.representative_values())?;
        let rows = idx
            .values
            .iter()
            .zip(&chain.times)
            .enumerate()
            .map(|(n, (u, t))| vec![n.to_string(), t.to_string(), num(*u)]);
        write_atomic(
            &a.out.join("index.csv"),
            &csv_bytes(&["n", "T_n", "U_n"], rows)?,
        )?;
    }
    let summary = AnalyzeSummary {
        format_version: FORMAT_VERSION,
        length: data.len(),
        tau_max: a.tau_max,
        rho: a.rho,
        max_wait: a.max_wait,
        fpt_starts: fpt.starts(),
        fpt_censored: fpt.censored,
    };
    write_atomic(&a.out.join("summary.json"), &json_bytes(&summary)?)?;
    println!(
        "acf(1) raw {:.4} squared {:.4}; {} of {} starts censored",
        raw.values[0],
        sq.values[0],
        fpt.censored,
        fpt.starts()
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse '{x}'")))
        })
        .collect::<CliResult<_>>()?;
    if out.is_empty() {
        return Err(CliError::Usage(format!("{flag} is empty")));
    }
    Ok(out)
}

#[derive(Serialize)]
struct BestCell {
    lambda: f64,
    m: Memory,
    mse: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    format_version: u32,
    seed: u64,
    tau_max: usize,
    replicates: usize,
    length: usize,
    best: Option<BestCell>,
    /// Mean over cells of the replicate MSE standard deviation.
    noise_floor: Option<f64>,
    cells: Vec<experiments::SweepCell>,
}

fn replicate_spread(cells: &[experiments::SweepCell]) -> Option<f64> {
    let sds: Vec<f64> = cells
        .iter()
        .filter(|c| c.replicate_mse.len() >= 2)
        .map(|c| {
            let n = c.replicate_mse.len() as f64;
            let mean = c.replicate_mse.iter().sum::<f64>() / n;
            (c.replicate_mse
                .iter()
                .map(|x| (x - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        })
        .collect();
    (!sds.is_empty()).then(|| sds.iter().sum::<f64>() / sds.len() as f64)
}

pub fn sweep(a: SweepArgs) -> CliResult<()> {
    let data = read_returns(&a.returns)?;
    let bins = bins_for(&data, a.states, a.bins_from.as_deref(), None)?;
    let cfg = SweepConfig {
        lambdas: parse_list(&a.lambdas, "--lambdas")?,
        memories: parse_list(&a.memories, "--memories")?,
        level_count: a.levels,
        min_transitions: a.min_transitions,
        seed: a.seed,
        tau_max: a.tau_max,
        replicates: a.replicates,
        burn_in: a.burn_in,
    };
    let res = experiments::sweep(&data, &bins, &cfg)?;
    ensure_dir(&a.out)?;
    let rows = res.cells.iter().map(|c| {
        vec![
            num(c.lambda),
            c.memory.to_string(),
            c.mse.map(num).unwrap_or_default(),
        ]
    });
    write_atomic(
        &a.out.join("sweep.csv"),
        &csv_bytes(&["lambda", "m", "mse"], rows)?,
    )?;
    let best = res.best_cell().map(|c| BestCell {
        lambda: c.lambda,
        m: c.memory,
        mse: c.mse.unwrap_or(f64::NAN),
    });
    let summary = SweepSummary {
        format_version: FORMAT_VERSION,
        seed: a.seed,
        tau_max: a.tau_max,
        replicates: a.replicates,
        length: data.len(),
        noise_floor: replicate_spread(&res.cells),
        best,
        cells: res.cells,
    };
    write_atomic(&a.out.join("summary.json"), &json_bytes(&summary)?)?;
    let failed = summary.cells.iter().filter(|c| c.error.is_some()).count();
    match &summary.best {
        Some(b) => println!(
            "best lambda {} m {} mse {:.6e} ({failed} failed cell(s))",
            b.lambda, b.m, b.mse
        ),
        None => println!("every cell failed"),
    }
    Ok(())
}

fn paired_acf_csv(
    data: &Option<AcfCurve>,
    sim: &Option<AcfCurve>,
    tau_max: usize,
) -> CliResult<Vec<u8>> {
    let cell =
        |c: &Option<AcfCurve>, k: usize| c.as_ref().map(|c| num(c.values[k])).unwrap_or_default();
    let rows = (0..tau_max).map(|k| vec![(k + 1).to_string(), cell(data, k), cell(sim, k)]);
    csv_bytes(&["lag", "data", "sim"], rows)
}

fn paired_fpt_csv(data: &FptSample, sim: &FptSample) -> CliResult<Vec<u8>> {
    let (dp, dc, sp, sc) = (data.pdf(), data.cdf(), sim.pdf(), sim.cdf());
    let rows = (0..data.max_wait).map(|k| {
        vec![
            (k + 1).to_string(),
            data.counts[k].to_string(),
            num(dp[k]),
            num(dc[k]),
            sim.counts[k].to_string(),
            num(sp[k]),
            num(sc[k]),
        ]
    });
    csv_bytes(
        &[
            "tau",
            "data_count",
            "data_pdf",
            "data_cdf",
            "sim_count",
            "sim_pdf",
            "sim_cdf",
        ],
        rows,
    )
}

pub fn report(a: ReportArgs) -> CliResult<()> {
    let data = read_returns(&a.returns)?;
    let model = read_model(&a.model)?;
    let start = model.state_space().classify(data[0]);
    let cfg = SimConfig::new(data.len() as u64, a.seed, start);
    let r = experiments::compare_report(&data, &model, &cfg, a.tau_max, a.rho, a.max_wait)?;
    ensure_dir(&a.out)?;
    write_atomic(&a.out.join("report.json"), &json_bytes(&r)?)?;
    write_atomic(
        &a.out.join("acf_raw.csv"),
        &paired_acf_csv(&r.acf_raw_data, &r.acf_raw_sim, a.tau_max)?,
    )?;
    write_atomic(
        &a.out.join("acf_squared.csv"),
        &paired_acf_csv(&r.acf_squared_data, &r.acf_squared_sim, a.tau_max)?,
    )?;
    write_atomic(
        &a.out.join("fpt.csv"),
        &paired_fpt_csv(&r.fpt_data, &r.fpt_sim)?,
    )?;
    match r.mse_squared {
        Some(m) => println!(
            "squared-return ACF mse {m:.6e}, {} fallback lookup(s)",
            r.fallback_uses
        ),
        None => println!(
            "squared-return ACF undefined, {} fallback lookup(s)",
            r.fallback_uses
        ),
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        states: a.states,
        levels: a.levels,
        lambda: a.lambda,
        memory: a.memory,
        dependence: a.dependence,
        kernel_seed: a.kernel_seed,
        return_scale: a.return_scale,
        calibration_minutes: a.calibration_minutes,
        ..SynthSpec::default()
    };
    let model: WismcModel = experiments::make_synthetic_truth(&spec)?;
    write_atomic(&a.out, model.to_json()?.as_bytes())?;
    if let (Some(path), Some(h)) = (&a.series_out, a.horizon) {
        let s = simulate_series(&model, &SimConfig::for_model(&model, h, a.seed), 0)?;
        let rows = s
            .returns
            .iter()
            .enumerate()
            .map(|(t, r)| vec![t.to_string(), num(*r)]);
        write_atomic(path, &csv_bytes(&["t", "return"], rows)?)?;
    }
    println!("index level edges: {:?}", model.index_levels().edges());
    Ok(())
}
