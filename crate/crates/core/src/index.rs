//! Exponentially weighted volatility index.
//!
//! At time `t` the index is the normalized weighted average of squared
//! per-minute returns over past minutes `a < t` with weight `lambda^(t-a)`.
//! The window covers every completed sojourn (unbounded memory) or the last
//! `m` sojourns.
//!
//! [`IndexEvaluator`] keeps one aggregate per sojourn, `(num, den, span)`,
//! anchored at the sojourn's end. Aggregates compose associatively,
//! `older ⊕ newer = (older.num·λ^span' + num', older.den·λ^span' + den', …)`,
//! so the sliding window is a two-stack queue: no subtraction, amortized O(1)
//! per transition, O(sojourn length) to build each block.

use crate::error::{Error, Result};
use crate::model::{IndexConfig, JumpChain, Memory};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    num: f64,
    den: f64,
    span: u64,
}

#[inline]
fn decay(lambda: f64, span: u64) -> f64 {
    if lambda == 1.0 {
        1.0
    } else if span > i32::MAX as u64 {
        0.0
    } else {
        lambda.powi(span as i32)
    }
}

impl Block {
    fn sojourn(value_sq: f64, len: u64, lambda: f64) -> Block {
        let den = if lambda == 1.0 {
            len as f64
        } else {
            let mut w = 1.0;
            let mut g = 0.0;
            for _ in 0..len {
                w *= lambda;
                g += w;
                if w == 0.0 {
                    break;
                }
            }
            g
        };
        Block {
            num: value_sq * den,
            den,
            span: len,
        }
    }

    #[inline]
    fn then(self, newer: Block, lambda: f64) -> Block {
        let d = decay(lambda, newer.span);
        Block {
            num: self.num * d + newer.num,
            den: self.den * d + newer.den,
            span: self.span + newer.span,
        }
    }
}

#[inline]
fn join(older: Option<Block>, newer: Option<Block>, lambda: f64) -> Option<Block> {
    match (older, newer) {
        (Some(a), Some(b)) => Some(a.then(b, lambda)),
        (a, None) => a,
        (None, b) => b,
    }
}

#[derive(Debug, Clone)]
enum Window {
    Unbounded(Option<Block>),
    Sliding {
        cap: usize,
        // front[k] aggregates front[k] and every newer element of `front`;
        // the oldest element sits on top.
        front: Vec<Block>,
        back: Vec<Block>,
        back_agg: Option<Block>,
    },
}

/// Incremental index evaluator; a cheap value type, clone one per worker.
#[derive(Debug, Clone)]
pub struct IndexEvaluator {
    lambda: f64,
    initial: f64,
    window: Window,
    current: f64,
}

impl IndexEvaluator {
    pub fn new(config: &IndexConfig) -> Self {
        let window = match config.memory {
            Memory::Unbounded => Window::Unbounded(None),
            Memory::Window(m) => Window::Sliding {
                cap: m.max(1) as usize,
                front: Vec::new(),
                back: Vec::new(),
                back_agg: None,
            },
        };
        IndexEvaluator {
            lambda: config.lambda,
            initial: config.initial_index,
            window,
            current: config.initial_index,
        }
    }

    /// Index value after the sojourns pushed so far.
    #[inline]
    pub fn value(&self) -> f64 {
        self.current
    }

    /// Appends a sojourn of `len` minutes at return `value` and returns the
    /// updated index.
    pub fn push(&mut self, value: f64, len: u64) -> f64 {
        let block = Block::sojourn(value * value, len, self.lambda);
        let lambda = self.lambda;
        let agg = match &mut self.window {
            Window::Unbounded(acc) => {
                *acc = join(*acc, Some(block), lambda);
                *acc
            }
            Window::Sliding {
                cap,
                front,
                back,
                back_agg,
            } => {
                back.push(block);
                *back_agg = join(*back_agg, Some(block), lambda);
                if front.len() + back.len() > *cap {
                    if front.is_empty() {
                        let mut acc: Option<Block> = None;
                        for b in back.drain(..).rev() {
                            acc = join(Some(b), acc, lambda);
                            front.push(acc.unwrap());
                        }
                        *back_agg = None;
                    }
                    front.pop();
                }
                join(front.last().copied(), *back_agg, lambda)
            }
        };
        self.current = match agg {
            Some(b) if b.den > 0.0 => b.num / b.den,
            _ => self.initial,
        };
        self.current
    }
}

/// Index values `U_0 .. U_N` at the transition times of a jump chain.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    pub values: Vec<f64>,
    pub config: IndexConfig,
}

fn state_value(reps: &[f64], label: u16) -> Result<f64> {
    reps.get((label as usize).wrapping_sub(1))
        .copied()
        .ok_or(Error::UnknownState(label))
}

/// Computes `U_n` for every transition `n` of the chain. `reps[k]` is the
/// return value of label `k + 1`.
pub fn index_at_transitions(
    chain: &JumpChain,
    config: &IndexConfig,
    reps: &[f64],
) -> Result<IndexSeries> {
    if chain.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    config.validate()?;
    let mut eval = IndexEvaluator::new(config);
    let mut values = Vec::with_capacity(chain.len());
    values.push(eval.value());
    for (n, len) in chain.sojourns().enumerate() {
        let r = state_value(reps, chain.states[n])?;
        values.push(eval.push(r, len));
    }
    Ok(IndexSeries {
        values,
        config: *config,
    })
}

/// Index `U(t)` at an arbitrary integer time, including the partially
/// elapsed sojourn when `t` is not a transition time. At `t = T_n` the result
/// is bit-identical to `index_at_transitions(..).values[n]`.
pub fn index_at_time(chain: &JumpChain, t: i64, config: &IndexConfig, reps: &[f64]) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if t < chain.times[0] as i64 {
        return Err(Error::TimeBeforeOrigin(t));
    }
    config.validate()?;
    let t = t as u64;
    let n = chain.count_until(t);
    let mut eval = IndexEvaluator::new(config);
    for (k, len) in chain.sojourns().take(n).enumerate() {
        eval.push(state_value(reps, chain.states[k])?, len);
    }
    let elapsed = t - chain.times[n];
    if elapsed > 0 {
        eval.push(state_value(reps, chain.states[n])?, elapsed);
    }
    Ok(eval.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct double sum over minutes, kept independent of the evaluator.
    fn naive(chain: &JumpChain, n: usize, lambda: f64, memory: Memory, reps: &[f64]) -> f64 {
        let first_k = match memory {
            Memory::Unbounded => 0,
            Memory::Window(m) => n.saturating_sub(m as usize),
        };
        let tn = chain.times[n] as i64;
        let (mut num, mut den) = (0.0, 0.0);
        for soj in first_k..n {
            let r = reps[chain.states[soj] as usize - 1];
            for a in chain.times[soj]..chain.times[soj + 1] {
                let w = lambda.powi((tn - a as i64) as i32);
                num += w * r * r;
                den += w;
            }
        }
        num / den
    }

    fn cfg(lambda: f64, memory: Memory) -> IndexConfig {
        IndexConfig::new(lambda, memory, 0.0).unwrap()
    }

    #[test]
    fn worked_example_lambda_half() {
        let chain = JumpChain::new(vec![1, 2, 1], vec![0, 2, 3]).unwrap();
        let reps = [0.1, 0.2];
        let s = index_at_transitions(&chain, &cfg(0.5, Memory::Unbounded), &reps).unwrap();
        let expect = (0.125 * 0.01 + 0.25 * 0.01 + 0.5 * 0.04) / 0.875;
        assert!((s.values[2] - expect).abs() < 1e-15);
        assert!((s.values[2] - 0.027_142_857_142_857).abs() < 1e-14);
        assert!((naive(&chain, 2, 0.5, Memory::Unbounded, &reps) - expect).abs() < 1e-15);

        let s1 = index_at_transitions(&chain, &cfg(0.5, Memory::Window(1)), &reps).unwrap();
        assert!((s1.values[2] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn single_sojourn_is_its_square() {
        let chain = JumpChain::new(vec![4, 1], vec![0, 3]).unwrap();
        let reps = [0.0, 0.0, 0.0, 0.03];
        for lambda in [0.1, 0.5, 0.97, 1.0] {
            let s = index_at_transitions(&chain, &cfg(lambda, Memory::Unbounded), &reps).unwrap();
            assert!((s.values[1] - 0.0009).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_one_is_plain_time_average() {
        let chain = JumpChain::new(vec![1, 2, 3, 1], vec![0, 4, 5, 8]).unwrap();
        let reps = [0.01, 0.02, 0.03];
        let s = index_at_transitions(&chain, &cfg(1.0, Memory::Unbounded), &reps).unwrap();
        let avg = (4.0 * 1e-4 + 4e-4 + 3.0 * 9e-4) / 8.0;
        assert!((s.values[3] - avg).abs() < 1e-16);
    }

    #[test]
    fn initial_value_and_agreement_at_transitions() {
        let chain = JumpChain::new(vec![1, 2, 1, 3], vec![0, 2, 3, 7]).unwrap();
        let reps = [0.1, 0.2, 0.05];
        let c = IndexConfig::new(0.5, Memory::Window(2), 0.123).unwrap();
        let s = index_at_transitions(&chain, &c, &reps).unwrap();
        assert_eq!(s.values[0], 0.123);
        assert_eq!(index_at_time(&chain, 0, &c, &reps).unwrap(), 0.123);
        for (n, &t) in chain.times.iter().enumerate() {
            let u = index_at_time(&chain, t as i64, &c, &reps).unwrap();
            assert_eq!(u.to_bits(), s.values[n].to_bits());
        }
        assert_eq!(
            index_at_time(&chain, -1, &c, &reps),
            Err(Error::TimeBeforeOrigin(-1))
        );
    }

    #[test]
    fn mid_sojourn_matches_truncated_oracle() {
        let chain = JumpChain::new(vec![1, 2, 1], vec![0, 2, 5]).unwrap();
        let reps = [0.1, 0.2];
        // t = 4: minutes 0,1 in state 1 and minutes 2,3 in state 2
        let t = 4i64;
        let states_at = [1usize, 1, 2, 2];
        let (mut num, mut den) = (0.0, 0.0);
        for (a, &st) in states_at.iter().enumerate() {
            let w = 0.5f64.powi((t - a as i64) as i32);
            num += w * reps[st - 1] * reps[st - 1];
            den += w;
        }
        let u = index_at_time(&chain, t, &cfg(0.5, Memory::Unbounded), &reps).unwrap();
        assert!((u - num / den).abs() < 1e-16);
        // beyond the last jump the final state keeps accruing
        let u_late = index_at_time(&chain, 9, &cfg(1.0, Memory::Unbounded), &reps).unwrap();
        let expect = (2.0 * 0.01 + 3.0 * 0.04 + 4.0 * 0.01) / 9.0;
        assert!((u_late - expect).abs() < 1e-16);
    }

    #[test]
    fn sliding_window_matches_naive_over_many_steps() {
        let states: Vec<u16> = (0..200).map(|k| (k % 3 + 1) as u16).collect();
        let mut times = vec![0u64];
        for k in 1..200u64 {
            times.push(times[k as usize - 1] + 1 + (k * 7 % 5));
        }
        let chain = JumpChain::new(states, times).unwrap();
        let reps = [0.003, 0.0001, 0.0021];
        for m in [1u32, 2, 3, 7, 64] {
            for lambda in [0.5, 0.9, 1.0] {
                let s =
                    index_at_transitions(&chain, &cfg(lambda, Memory::Window(m)), &reps).unwrap();
                for n in 1..chain.len() {
                    let o = naive(&chain, n, lambda, Memory::Window(m), &reps);
                    assert!(
                        ((s.values[n] - o) / o).abs() <= 1e-12,
                        "m={m} lambda={lambda} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn window_larger_than_history_equals_unbounded() {
        let chain = JumpChain::new(vec![1, 2, 1, 2, 1], vec![0, 1, 4, 6, 7]).unwrap();
        let reps = [0.01, 0.02];
        let u = index_at_transitions(&chain, &cfg(0.9, Memory::Unbounded), &reps).unwrap();
        let w = index_at_transitions(&chain, &cfg(0.9, Memory::Window(4)), &reps).unwrap();
        assert_eq!(u.values, w.values);
    }
}
