//! Stylized-fact statistics: autocorrelations of returns and squared returns,
//! the mean squared error between two ACF curves, and first-passage times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Default largest lag, in minutes.
pub const DEFAULT_TAU_MAX: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

impl AcfCurve {
    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags
            .iter()
            .position(|&l| l == lag)
            .map(|k| self.values[k])
    }
}

#[inline]
fn lagged_dot(d: &[f64], lag: usize) -> f64 {
    d[lag..].iter().zip(d).map(|(a, b)| a * b).sum()
}

/// Sample autocorrelation for lags `min_lag ..= tau_max`, using the
/// full-sample mean and the divide-by-n covariance for every lag.
pub fn autocorrelation(series: &[f64], min_lag: usize, tau_max: usize) -> Result<AcfCurve> {
    let n = series.len();
    if n <= tau_max || min_lag > tau_max {
        return Err(Error::SeriesTooShort { len: n, tau_max });
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::DegenerateVariance);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = lagged_dot(&d, 0) / n as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let lags: Vec<usize> = (min_lag..=tau_max).collect();
    let values = par::map_slice(&lags, |&lag| (lagged_dot(&d, lag) / n as f64) / var);
    Ok(AcfCurve { lags, values })
}

/// Autocorrelation of squared returns at lags `1 ..= tau_max`.
pub fn acf_squared(returns: &[f64], tau_max: usize) -> Result<AcfCurve> {
    let sq: Vec<f64> = returns.iter().map(|r| r * r).collect();
    autocorrelation(&sq, 1, tau_max)
}

/// Autocorrelation of raw returns at lags `1 ..= tau_max`.
pub fn acf_raw(returns: &[f64], tau_max: usize) -> Result<AcfCurve> {
    autocorrelation(returns, 1, tau_max)
}

/// Mean over lags of the squared difference between two curves.
pub fn mse_acf(real: &AcfCurve, sim: &AcfCurve) -> Result<f64> {
    if real.lags != sim.lags || real.values.len() != sim.values.len() || real.lags.is_empty() {
        return Err(Error::LagGridMismatch);
    }
    let sum: f64 = real
        .values
        .iter()
        .zip(&sim.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / real.values.len() as f64)
}

/// Empirical first-passage-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptSample {
    pub rho: f64,
    pub max_wait: usize,
    /// `counts[k]` starts that first reached the threshold after `k + 1` minutes.
    pub counts: Vec<u64>,
    pub censored: u64,
}

impl FptSample {
    pub fn starts(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.censored
    }

    pub fn crossed(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mass per waiting time, normalized by all starts (censored included).
    pub fn pdf(&self) -> Vec<f64> {
        let n = self.starts().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// `P[Γ <= τ]` over all starts; the gap to one is the censored mass.
    pub fn cdf(&self) -> Vec<f64> {
        let n = self.starts().max(1) as f64;
        let mut acc = 0u64;
        self.counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / n
            })
            .collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.starts().max(1) as f64
    }
}

const FPT_CHUNK: usize = 2048;

/// For every start `t` with at least `max_wait` later observations, finds
/// the first `τ >= 1` with `Π_{u=t}^{t+τ-1} (1 + r_u) >= rho`, censoring at
/// `max_wait`.
pub fn fpt_distribution(returns: &[f64], rho: f64, max_wait: usize) -> Result<FptSample> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::InvalidThreshold(rho));
    }
    if max_wait == 0 {
        return Err(Error::InvalidConfig("max_wait must be at least 1".into()));
    }
    let starts = (returns.len() + 1).saturating_sub(max_wait);
    let chunks = starts.div_ceil(FPT_CHUNK);
    let partial = par::map_range(chunks, |c| {
        let mut counts = vec![0u64; max_wait];
        let mut censored = 0u64;
        for t in c * FPT_CHUNK..((c + 1) * FPT_CHUNK).min(starts) {
            let mut ratio = 1.0;
            let mut hit = None;
            for (k, r) in returns[t..t + max_wait].iter().enumerate() {
                ratio *= 1.0 + r;
                if ratio >= rho {
                    hit = Some(k);
                    break;
                }
            }
            match hit {
                Some(k) => counts[k] += 1,
                None => censored += 1,
            }
        }
        (counts, censored)
    });
    let mut counts = vec![0u64; max_wait];
    let mut censored = 0;
    for (c, z) in partial {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        censored += z;
    }
    Ok(FptSample {
        rho,
        max_wait,
        counts,
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_acf(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let mu = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let mut cov = 0.0;
        for t in 0..x.len() - lag {
            cov += (x[t] - mu) * (x[t + lag] - mu);
        }
        cov / n / var
    }

    #[test]
    fn constant_magnitude_is_degenerate() {
        let z: Vec<f64> = (0..50)
            .map(|k| if k % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        assert_eq!(acf_squared(&z, 5), Err(Error::DegenerateVariance));
        assert!(acf_raw(&z, 5).is_ok());
    }

    #[test]
    fn lag_zero_is_one() {
        let z = [0.1, -0.3, 0.2, 0.05, -0.02, 0.4];
        let c = autocorrelation(&z, 0, 2).unwrap();
        assert_eq!(c.values[0], 1.0);
    }

    #[test]
    fn alternating_squares() {
        let z = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let c = acf_squared(&z, 2).unwrap();
        let sq: Vec<f64> = z.iter().map(|x| x * x).collect();
        assert!((c.values[0] - direct_acf(&sq, 1)).abs() < 1e-12);
        assert!((c.values[1] - direct_acf(&sq, 2)).abs() < 1e-12);
        // divide-by-n estimator: -5/6 and 4/6
        assert!((c.values[0] + 5.0 / 6.0).abs() < 1e-12);
        assert!((c.values[1] - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_raw_series() {
        let z: Vec<f64> = (0..1000)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let c = acf_raw(&z, 3).unwrap();
        assert!((c.values[0] + 0.999).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|x| x + 5.0).collect();
        let s = acf_raw(&shifted, 3).unwrap();
        for (a, b) in c.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        assert_eq!(
            acf_raw(&[1.0, 2.0, 3.0], 3),
            Err(Error::SeriesTooShort { len: 3, tau_max: 3 })
        );
    }

    #[test]
    fn mse_examples() {
        let lags: Vec<usize> = (1..=100).collect();
        let a = AcfCurve {
            lags: lags.clone(),
            values: (0..100).map(|k| 0.5 / (1.0 + k as f64)).collect(),
        };
        assert_eq!(mse_acf(&a, &a).unwrap(), 0.0);
        let b = AcfCurve {
            lags,
            values: a.values.iter().map(|v| v + 0.1).collect(),
        };
        assert!((mse_acf(&a, &b).unwrap() - 0.01).abs() < 1e-12);
        let c = AcfCurve {
            lags: vec![1, 2],
            values: vec![0.3, 0.1],
        };
        let d = AcfCurve {
            lags: vec![1, 2],
            values: vec![0.1, 0.4],
        };
        // (0.2^2 + 0.3^2) / 2
        assert!((mse_acf(&c, &d).unwrap() - 0.065).abs() < 1e-15);
        assert_eq!(mse_acf(&a, &c), Err(Error::LagGridMismatch));
    }

    #[test]
    fn fpt_examples() {
        let up = vec![0.01; 50];
        let f = fpt_distribution(&up, 1.005, 10).unwrap();
        assert_eq!(f.counts[0], f.starts());
        assert_eq!(f.censored, 0);

        let flat = vec![0.0; 50];
        let f = fpt_distribution(&flat, 1.005, 10).unwrap();
        assert_eq!(f.censored, 41);
        assert_eq!(f.crossed(), 0);

        let slow = vec![0.001; 200];
        let f = fpt_distribution(&slow, 1.005, 20).unwrap();
        let mut tau = 0;
        let mut x = 1.0f64;
        while x < 1.005 {
            x *= 1.001;
            tau += 1;
        }
        assert_eq!(tau, 5);
        assert_eq!(f.counts[tau - 1], f.starts());
        assert!((f.cdf()[4] - 1.0).abs() < 1e-15);

        assert_eq!(
            fpt_distribution(&slow, 1.0, 5),
            Err(Error::InvalidThreshold(1.0))
        );
    }
}
