//! Tick parsing, previous-tick resampling and simple returns.

use std::io::Read;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub price: f64,
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickSeries {
    pub records: Vec<Tick>,
}

impl TickSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_sessions(&self) -> bool {
        self.records.iter().any(|t| t.session.is_some())
    }

    /// Splits into consecutive runs sharing a session tag. Untagged series
    /// form a single session.
    pub fn sessions(&self) -> Vec<TickSeries> {
        let mut out: Vec<TickSeries> = Vec::new();
        for tick in &self.records {
            match out.last_mut() {
                Some(cur) if cur.records.last().map(|t| &t.session) == Some(&tick.session) => {
                    cur.records.push(tick.clone())
                }
                _ => out.push(TickSeries {
                    records: vec![tick.clone()],
                }),
            }
        }
        out
    }

    /// Keeps ticks inside the daily `[open, close]` window (UTC seconds of
    /// day) and tags each with its calendar day.
    pub fn with_schedule(&self, schedule: &DailySchedule) -> TickSeries {
        let records = self
            .records
            .iter()
            .filter_map(|t| {
                let day = t.timestamp.div_euclid(86_400);
                let sod = t.timestamp.rem_euclid(86_400);
                (sod >= schedule.open && sod <= schedule.close).then(|| Tick {
                    session: Some(day.to_string()),
                    ..t.clone()
                })
            })
            .collect();
        TickSeries { records }
    }
}

/// Trading hours as UTC seconds of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DailySchedule {
    pub open: i64,
    pub close: i64,
}

impl std::str::FromStr for DailySchedule {
    type Err = Error;
    /// Parses `HH:MM-HH:MM`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("invalid schedule '{s}', expected HH:MM-HH:MM"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let parse = |x: &str| -> Result<i64> {
            let (h, m) = x.trim().split_once(':').ok_or_else(bad)?;
            let h: i64 = h.parse().map_err(|_| bad())?;
            let m: i64 = m.parse().map_err(|_| bad())?;
            if !(0..24).contains(&h) || !(0..60).contains(&m) {
                return Err(bad());
            }
            Ok(h * 3600 + m * 60)
        };
        let (open, close) = (parse(a)?, parse(b)?);
        if open >= close {
            return Err(bad());
        }
        Ok(DailySchedule { open, close })
    }
}

fn parse_timestamp(field: &str) -> Option<i64> {
    let f = field.trim();
    if let Ok(v) = f.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(f) {
        return Some(dt.timestamp());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(f, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

/// Parses `timestamp,price[,session]` CSV. Line numbers in errors are
/// 1-based and count the header.
pub fn parse_ticks<R: Read>(source: R) -> Result<TickSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers().map_err(|_| Error::MalformedRow(1))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let ts_col = col("timestamp").ok_or(Error::MalformedRow(1))?;
    let price_col = col("price").ok_or(Error::MalformedRow(1))?;
    let session_col = col("session");

    let mut records: Vec<Tick> = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let fallback_line = k + 2;
        let row = row.map_err(|e| {
            Error::MalformedRow(e.position().map_or(fallback_line, |p| p.line() as usize))
        })?;
        let line = row.position().map_or(fallback_line, |p| p.line() as usize);
        if row.len() != headers.len() {
            return Err(Error::MalformedRow(line));
        }
        let timestamp = parse_timestamp(&row[ts_col]).ok_or(Error::MalformedRow(line))?;
        let price: f64 = row[price_col]
            .parse()
            .map_err(|_| Error::MalformedRow(line))?;
        if !price.is_finite() {
            return Err(Error::MalformedRow(line));
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice(line));
        }
        if records.last().is_some_and(|p| timestamp < p.timestamp) {
            return Err(Error::NonMonotoneTime(line));
        }
        let session = session_col.map(|c| row[c].to_string());
        records.push(Tick {
            timestamp,
            price,
            session,
        });
    }
    Ok(TickSeries { records })
}

/// Prices on an epoch-aligned regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    pub start_time: i64,
    pub step: u64,
    pub prices: Vec<f64>,
}

/// Previous-tick resampling onto multiples of `step` seconds, from the
/// first grid point at or after the first tick through the first grid point
/// at or after the last tick.
pub fn resample(ticks: &TickSeries, step: u64) -> Result<PriceGrid> {
    if step == 0 {
        return Err(Error::InvalidConfig(
            "step must be at least one second".into(),
        ));
    }
    let (first, last) = match (ticks.records.first(), ticks.records.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(Error::EmptyInput),
    };
    let step_i = step as i64;
    let ceil_grid =
        |t: i64| t.div_euclid(step_i) * step_i + if t.rem_euclid(step_i) == 0 { 0 } else { step_i };
    let start = ceil_grid(first);
    let end = ceil_grid(last);
    let mut prices = Vec::with_capacity(((end - start) / step_i + 1) as usize);
    let mut k = 0usize;
    let recs = &ticks.records;
    let mut g = start;
    while g <= end {
        while k + 1 < recs.len() && recs[k + 1].timestamp <= g {
            k += 1;
        }
        prices.push(recs[k].price);
        g += step_i;
    }
    Ok(PriceGrid {
        start_time: start,
        step,
        prices,
    })
}

/// Simple returns on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub start_time: i64,
    pub step: u64,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("returns must be finite".into()));
        }
        Ok(ReturnSeries {
            start_time: 0,
            step: 60,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Start timestamp of the `k`-th return interval.
    pub fn time_of(&self, k: usize) -> i64 {
        self.start_time + k as i64 * self.step as i64
    }
}

/// `(S(t+1) - S(t)) / S(t)` for consecutive grid prices.
pub fn compute_returns(grid: &PriceGrid) -> Result<ReturnSeries> {
    if grid.prices.len() < 2 {
        return Err(Error::EmptyInput);
    }
    if grid.prices.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidConfig("prices must be positive".into()));
    }
    let values = grid
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    Ok(ReturnSeries {
        start_time: grid.start_time,
        step: grid.step,
        values,
    })
}

/// Resamples each session separately and computes within-session returns.
/// Sessions with fewer than two grid points contribute nothing.
pub fn session_returns(ticks: &TickSeries, step: u64) -> Result<Vec<ReturnSeries>> {
    if ticks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::new();
    for session in ticks.sessions() {
        let grid = resample(&session, step)?;
        if grid.prices.len() >= 2 {
            out.push(compute_returns(&grid)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(pairs: &[(i64, f64)]) -> TickSeries {
        TickSeries {
            records: pairs
                .iter()
                .map(|&(timestamp, price)| Tick {
                    timestamp,
                    price,
                    session: None,
                })
                .collect(),
        }
    }

    #[test]
    fn parses_minimal_input() {
        let t =
            parse_ticks("timestamp,price\n1167730860,7.125\n1167730920,7.130".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.records[1].price, 7.130);
        assert!(!t.has_sessions());
    }

    #[test]
    fn parses_iso_timestamps_and_sessions() {
        let src = "timestamp,price,session\n2007-01-02T09:00:00Z,10,a\n2007-01-02 09:01:00,11,a\n2007-01-03T09:00:00,12,b\n";
        let t = parse_ticks(src.as_bytes()).unwrap();
        assert_eq!(t.records[1].timestamp - t.records[0].timestamp, 60);
        assert_eq!(t.sessions().len(), 2);
    }

    #[test]
    fn reports_line_numbers() {
        let src = "timestamp,price\n100,1.0\n50,1.0\n";
        assert_eq!(parse_ticks(src.as_bytes()), Err(Error::NonMonotoneTime(3)));
        let src = "timestamp,price\n100,0\n";
        assert_eq!(parse_ticks(src.as_bytes()), Err(Error::NonPositivePrice(2)));
        let src = "timestamp,price\n100,abc\n";
        assert_eq!(parse_ticks(src.as_bytes()), Err(Error::MalformedRow(2)));
        let src = "timestamp,price\n100,1.0,extra\n";
        assert_eq!(parse_ticks(src.as_bytes()), Err(Error::MalformedRow(2)));
    }

    #[test]
    fn previous_tick_rule() {
        let g = resample(&ticks(&[(0, 10.0), (90, 11.0)]), 60).unwrap();
        assert_eq!(g.start_time, 0);
        assert_eq!(g.prices, vec![10.0, 10.0, 11.0]);

        let g = resample(&ticks(&[(30, 5.0)]), 60).unwrap();
        assert_eq!((g.start_time, g.prices.clone()), (60, vec![5.0]));

        let g = resample(&ticks(&[(0, 1.0), (60, 2.0), (120, 3.0)]), 60).unwrap();
        assert_eq!(g.prices, vec![1.0, 2.0, 3.0]);

        assert_eq!(resample(&TickSeries::default(), 60), Err(Error::EmptyInput));
    }

    #[test]
    fn returns_examples() {
        let grid = |p: &[f64]| PriceGrid {
            start_time: 0,
            step: 60,
            prices: p.to_vec(),
        };
        assert_eq!(
            compute_returns(&grid(&[100.0, 101.0])).unwrap().values,
            vec![0.01]
        );
        let r = compute_returns(&grid(&[100.0, 101.0, 99.99]))
            .unwrap()
            .values;
        assert!((r[0] - 0.01).abs() < 1e-12 && (r[1] + 0.01).abs() < 1e-12);
        assert!(compute_returns(&grid(&[3.0; 5]))
            .unwrap()
            .values
            .iter()
            .all(|&x| x == 0.0));
        assert_eq!(compute_returns(&grid(&[1.0])), Err(Error::EmptyInput));
    }

    #[test]
    fn schedule_splits_days() {
        let sched: DailySchedule = "09:00-17:30".parse().unwrap();
        let day = 86_400;
        let t = ticks(&[
            (9 * 3600 - 60, 1.0),
            (9 * 3600, 1.0),
            (9 * 3600 + 60, 2.0),
            (day + 9 * 3600, 4.0),
            (day + 9 * 3600 + 60, 5.0),
        ]);
        let sessions = t.with_schedule(&sched);
        assert_eq!(sessions.len(), 4);
        let r = session_returns(&sessions, 60).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].values, vec![1.0]);
        assert_eq!(r[1].values, vec![0.25]);
        assert!("17:00-09:00".parse::<DailySchedule>().is_err());
    }
}
