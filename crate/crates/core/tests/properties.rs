use proptest::prelude::*;

use wismc::discretize::{discretize_series, fit_return_bins};
use wismc::estimation::{build_trajectory, fit, fit_plain_smc, FitOptions};
use wismc::index::{index_at_time, index_at_transitions};
use wismc::ingestion::{compute_returns, resample, PriceGrid, Tick, TickSeries};
use wismc::simulate::{simulate_path, SimConfig};
use wismc::stats::{acf_raw, acf_squared, fpt_distribution, mse_acf, AcfCurve};
use wismc::{IndexConfig, JumpChain, Memory, StateSpace};

fn chain_strategy(states: u16) -> impl Strategy<Value = JumpChain> {
    prop::collection::vec((1..states, 1u64..10), 1..50).prop_map(move |steps| {
        let mut s = vec![1u16];
        let mut t = vec![0u64];
        for (jump, len) in steps {
            let prev = *s.last().unwrap();
            // a non-zero offset modulo `states` never repeats the state
            s.push((prev - 1 + jump) % states + 1);
            t.push(t.last().unwrap() + len);
        }
        JumpChain::new(s, t).unwrap()
    })
}

fn memory_strategy() -> impl Strategy<Value = Memory> {
    prop_oneof![Just(Memory::Unbounded), (1u32..8).prop_map(Memory::Window)]
}

fn labels_strategy() -> impl Strategy<Value = Vec<u16>> {
    prop::collection::vec(1u16..=5, 1500..3000)
}

/// Squared values of the sojourns that enter `U_n`.
fn window_squares(chain: &JumpChain, reps: &[f64], n: usize, memory: Memory) -> Vec<f64> {
    let first = match memory {
        Memory::Unbounded => 0,
        Memory::Window(m) => n.saturating_sub(m as usize),
    };
    (first..n)
        .map(|k| reps[chain.states[k] as usize - 1].powi(2))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labels_are_monotone_and_in_range(
        training in prop::collection::vec(-0.01f64..0.01, 60..400),
        probe in prop::collection::vec(-0.02f64..0.02, 2..50),
    ) {
        let bins = fit_return_bins(&training, 5);
        prop_assume!(bins.is_ok());
        let bins = bins.unwrap();
        let mut sorted = probe.clone();
        sorted.sort_by(f64::total_cmp);
        let labels = discretize_series(&sorted, &bins.edges);
        prop_assert!(labels.iter().all(|&l| (1..=5).contains(&l)));
        prop_assert!(labels.windows(2).all(|w| w[0] <= w[1]));
        let covered = bins.discretize(&training);
        prop_assert!(covered.iter().all(|&l| (1..=5).contains(&l)));
    }

    #[test]
    fn negated_returns_mirror_edges(training in prop::collection::vec(-0.01f64..0.01, 70..400)) {
        let a = fit_return_bins(&training, 7);
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        let neg: Vec<f64> = training.iter().map(|x| -x).collect();
        let b = fit_return_bins(&neg, 7).unwrap();
        let mirrored: Vec<f64> = a.edges.iter().rev().map(|e| -e).collect();
        for (x, y) in b.edges.iter().zip(&mirrored) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn returns_are_scale_invariant(
        prices in prop::collection::vec(1.0f64..200.0, 2..100),
        c in 0.01f64..100.0,
    ) {
        let grid = PriceGrid { start_time: 0, step: 60, prices: prices.clone() };
        let scaled = PriceGrid { prices: prices.iter().map(|p| p * c).collect(), ..grid.clone() };
        let a = compute_returns(&grid).unwrap();
        let b = compute_returns(&scaled).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_ticks_give_zero_returns(
        gaps in prop::collection::vec(1i64..500, 2..40),
        step in 1u64..400,
        price in 0.5f64..500.0,
    ) {
        let mut t = 1_000_000i64;
        let records = gaps.iter().map(|g| { t += g; Tick { timestamp: t, price, session: None } }).collect();
        let grid = resample(&TickSeries { records }, step).unwrap();
        prop_assume!(grid.prices.len() >= 2);
        prop_assert!(compute_returns(&grid).unwrap().values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn index_is_a_convex_combination(
        chain in chain_strategy(5),
        lambda in 0.3f64..=1.0,
        memory in memory_strategy(),
    ) {
        let reps = [-0.02, -0.01, 0.0, 0.01, 0.03];
        let cfg = IndexConfig::new(lambda, memory, 0.0).unwrap();
        let u = index_at_transitions(&chain, &cfg, &reps).unwrap().values;
        for n in 1..u.len() {
            let w = window_squares(&chain, &reps, n, memory);
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(0.0, f64::max);
            prop_assert!(u[n] >= lo * (1.0 - 1e-12) && u[n] <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn index_at_time_agrees_exactly(
        chain in chain_strategy(4),
        lambda in 0.3f64..=1.0,
        memory in memory_strategy(),
    ) {
        let reps = [-0.01, 0.0, 0.01, 0.02];
        let cfg = IndexConfig::new(lambda, memory, 1e-5).unwrap();
        let u = index_at_transitions(&chain, &cfg, &reps).unwrap().values;
        for (n, &t) in chain.times.iter().enumerate() {
            prop_assert_eq!(index_at_time(&chain, t as i64, &cfg, &reps).unwrap(), u[n]);
        }
    }

    #[test]
    fn long_window_equals_unbounded(chain in chain_strategy(5), lambda in 0.3f64..=1.0) {
        let reps = [-0.02, -0.01, 0.0, 0.01, 0.02];
        let unb = index_at_transitions(&chain, &IndexConfig::new(lambda, Memory::Unbounded, 0.0).unwrap(), &reps)
            .unwrap().values;
        for n in 0..unb.len() {
            let m = (n as u32).max(1);
            let w = index_at_transitions(&chain, &IndexConfig::new(lambda, Memory::Window(m), 0.0).unwrap(), &reps)
                .unwrap().values;
            prop_assert_eq!(w[n], unb[n]);
        }
    }

    #[test]
    fn index_is_continuous_in_lambda(chain in chain_strategy(5), lambda in 0.5f64..0.999) {
        let reps = [-0.02, -0.01, 0.0, 0.01, 0.02];
        let h = 1e-9;
        let a = index_at_transitions(&chain, &IndexConfig::new(lambda, Memory::Unbounded, 0.0).unwrap(), &reps).unwrap();
        let b = index_at_transitions(&chain, &IndexConfig::new(lambda + h, Memory::Unbounded, 0.0).unwrap(), &reps).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-5 * 4e-4);
        }
    }

    #[test]
    fn acf_is_affine_invariant(
        x in prop::collection::vec(-1.0f64..1.0, 40..200),
        c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        b in -5.0f64..5.0,
    ) {
        let raw = acf_raw(&x, 10);
        prop_assume!(raw.is_ok());
        let shifted: Vec<f64> = x.iter().map(|v| c * v + b).collect();
        for (p, q) in raw.unwrap().values.iter().zip(&acf_raw(&shifted, 10).unwrap().values) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let sq = acf_squared(&x, 10).unwrap();
        for (p, q) in sq.values.iter().zip(&acf_squared(&scaled, 10).unwrap().values) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn mse_is_symmetric_and_zero_only_on_equal(
        a in prop::collection::vec(-1.0f64..1.0, 1..30),
        d in prop::collection::vec(-1.0f64..1.0, 1..30),
    ) {
        let lags: Vec<usize> = (1..=a.len()).collect();
        let b: Vec<f64> = a.iter().zip(d.iter().cycle()).map(|(x, y)| x + y).collect();
        let ca = AcfCurve { lags: lags.clone(), values: a.clone() };
        let cb = AcfCurve { lags, values: b.clone() };
        let ab = mse_acf(&ca, &cb).unwrap();
        prop_assert_eq!(ab, mse_acf(&cb, &ca).unwrap());
        prop_assert_eq!(mse_acf(&ca, &ca).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn fpt_matches_quadratic_scan(
        r in prop::collection::vec(-0.004f64..0.0045, 1..1500),
        max_wait in 1usize..60,
    ) {
        let f = fpt_distribution(&r, 1.005, max_wait).unwrap();
        let (counts, censored) = brute_fpt(&r, 1.005, max_wait);
        prop_assert_eq!(f.counts, counts);
        prop_assert_eq!(f.censored, censored);
    }

    #[test]
    fn fitted_kernels_are_valid(labels in labels_strategy(), lambda in 0.8f64..=1.0) {
        let space = StateSpace::symmetric_grid(5, 1e-3).unwrap();
        let cfg = IndexConfig::new(lambda, Memory::Unbounded, 0.0).unwrap();
        let opts = FitOptions { level_count: 3, min_transitions: 100 };
        let model = fit(&labels, &space, &cfg, &opts);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        model.check_invariants().unwrap();

        // Q(t) = p G(t) is non-decreasing and each row's limit sums to one
        for i in 1..=5u16 {
            for v in 1..=3 {
                if model.cell_count(i, v).unwrap() == 0 {
                    continue;
                }
                let mut total = 0.0;
                for j in 1..=5u16 {
                    let mut prev = 0.0;
                    for t in 1..=200 {
                        let q = model.kernel(i, j, v, t).unwrap();
                        prop_assert!(q >= prev);
                        prev = q;
                    }
                    total += prev;
                }
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }

        // counts conserve transitions and collapse to the plain estimator
        let chain = build_trajectory(&labels).unwrap();
        prop_assert_eq!(model.cell_counts().iter().sum::<u64>(), chain.len() as u64 - 1);
        let plain = fit_plain_smc(&labels, 5).unwrap();
        prop_assert_eq!(model.collapsed_counts(), plain.counts);
    }

    #[test]
    fn simulated_paths_are_consistent(seed in any::<u64>(), horizon in 1u64..3000) {
        let model = toy_model();
        let cfg = SimConfig::for_model(&model, horizon, seed);
        let p = simulate_path(&model, &cfg).unwrap();
        let states = p.trajectory.states();
        prop_assert!(states.windows(2).all(|w| w[0] != w[1]));
        prop_assert!(*p.trajectory.times().last().unwrap() >= horizon);
        let post = index_at_transitions(
            &p.trajectory.chain,
            model.index_config(),
            model.state_space().representative_values(),
        )
        .unwrap();
        prop_assert_eq!(&post.values, &p.trajectory.index_values);
        prop_assert_eq!(simulate_path(&model, &cfg).unwrap(), p);
    }
}

fn brute_fpt(r: &[f64], rho: f64, max_wait: usize) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; max_wait];
    let mut censored = 0;
    for t in 0..r.len() {
        if t + max_wait > r.len() {
            break;
        }
        let first = (1..=max_wait).find(|&tau| {
            let mut g = 1.0;
            for u in t..t + tau {
                g *= 1.0 + r[u];
            }
            g >= rho
        });
        match first {
            Some(tau) => counts[tau - 1] += 1,
            None => censored += 1,
        }
    }
    (counts, censored)
}

fn toy_model() -> wismc::WismcModel {
    use std::sync::OnceLock;
    use wismc::experiments::{make_synthetic_truth, SynthSpec};
    static MODEL: OnceLock<wismc::WismcModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            make_synthetic_truth(&SynthSpec {
                calibration_minutes: 20_000,
                ..SynthSpec::default()
            })
            .unwrap()
        })
        .clone()
}
