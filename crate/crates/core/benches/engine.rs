//! Sequential vs data-parallel timings for the hot loops.
//!
//! With the default `parallel` feature each workload runs twice: inside a
//! one-thread rayon pool and inside the global pool. Built with
//! `--no-default-features` only the sequential code path exists.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wismc::discretize::ReturnBins;
use wismc::experiments::{make_synthetic_truth, sweep, SweepConfig, SynthSpec};
use wismc::simulate::{simulate_paths, simulate_series, SimConfig};
use wismc::stats::{acf_squared, fpt_distribution};
use wismc::{Memory, WismcModel};

struct Fixture {
    model: WismcModel,
    data: Vec<f64>,
    bins: ReturnBins,
}

fn fixture() -> Fixture {
    let model = make_synthetic_truth(&SynthSpec {
        calibration_minutes: 100_000,
        ..SynthSpec::default()
    })
    .unwrap();
    let data = simulate_series(&model, &SimConfig::for_model(&model, 200_000, 1), 0)
        .unwrap()
        .returns;
    let bins = ReturnBins::from_edges(model.state_space().return_edges().to_vec(), &data).unwrap();
    Fixture { model, data, bins }
}

fn modes() -> Vec<(&'static str, Option<usize>)> {
    let mut m = vec![("sequential", Some(1))];
    if wismc::is_parallel() {
        m.push(("parallel", None));
    }
    m
}

#[cfg(feature = "parallel")]
fn in_mode<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_mode<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn benches(c: &mut Criterion) {
    let fx = fixture();

    let mut g = c.benchmark_group("simulate_paths");
    g.sample_size(10);
    let mut cfg = SimConfig::for_model(&fx.model, 100_000, 7);
    cfg.n_paths = 16;
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::new(name, "16x1e5"), |b| {
            b.iter(|| {
                in_mode(threads, || {
                    black_box(simulate_paths(&fx.model, &cfg).unwrap())
                })
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("acf_squared");
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::new(name, "2e5 x 100 lags"), |b| {
            b.iter(|| in_mode(threads, || black_box(acf_squared(&fx.data, 100).unwrap())))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("fpt");
    g.sample_size(20);
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::new(name, "2e5 rho 1.002"), |b| {
            b.iter(|| {
                in_mode(threads, || {
                    black_box(fpt_distribution(&fx.data, 1.002, 500).unwrap())
                })
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    let sw = SweepConfig {
        lambdas: vec![0.94, 0.96, 0.98, 1.0],
        memories: vec![Memory::Window(50), Memory::Unbounded],
        tau_max: 50,
        ..SweepConfig::default()
    };
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::new(name, "4x2 grid"), |b| {
            b.iter(|| {
                in_mode(threads, || {
                    black_box(sweep(&fx.data, &fx.bins, &sw).unwrap())
                })
            })
        });
    }
    g.finish();
}

criterion_group!(engine, benches);
criterion_main!(engine);
