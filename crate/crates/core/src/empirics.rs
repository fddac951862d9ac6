//! Network time series: ingestion, monthly means, three-month returns, log-log OLS.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    HashRate,
    Reward,
    Price,
    Fees,
}

impl Field {
    pub fn column(self) -> &'static str {
        match self {
            Field::HashRate => "hash_rate",
            Field::Reward => "reward_usd",
            Field::Price => "price_usd",
            Field::Fees => "fees_usd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub hash_rate: f64,
    pub reward_usd: f64,
    pub price_usd: f64,
    pub fees_usd: Option<f64>,
}

impl Observation {
    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::HashRate => Some(self.hash_rate),
            Field::Reward => Some(self.reward_usd),
            Field::Price => Some(self.price_usd),
            Field::Fees => self.fees_usd,
        }
    }
}

/// Dated observations with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSeries {
    rows: Vec<Observation>,
    /// Consecutive dates more than one day apart.
    gaps: Vec<(NaiveDate, NaiveDate)>,
}

impl MarketSeries {
    pub fn new(rows: Vec<Observation>) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            let values = [
                ("hash_rate", Some(row.hash_rate)),
                ("reward_usd", Some(row.reward_usd)),
                ("price_usd", Some(row.price_usd)),
                ("fees_usd", row.fees_usd),
            ];
            for (name, v) in values {
                if let Some(v) = v {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::invalid(name, format!("row {} on {}: must be non-negative, got {v}", k + 1, row.date)));
                    }
                }
            }
        }
        if let Some(w) = rows.windows(2).find(|w| w[1].date <= w[0].date) {
            return Err(Error::invalid("date", format!("dates must be strictly increasing: {} follows {}", w[1].date, w[0].date)));
        }
        let gaps = rows
            .windows(2)
            .filter(|w| (w[1].date - w[0].date).num_days() > 1)
            .map(|w| (w[0].date, w[1].date))
            .collect();
        Ok(Self { rows, gaps })
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn gaps(&self) -> &[(NaiveDate, NaiveDate)] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.rows.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.rows.last().map(|r| r.date)
    }
}

const COLUMNS: [&str; 5] = ["date", "hash_rate", "reward_usd", "price_usd", "fees_usd"];

pub fn load_series(path: impl AsRef<Path>) -> Result<MarketSeries> {
    read_series(std::fs::File::open(path)?)
}

/// Parses `date,hash_rate,reward_usd,price_usd[,fees_usd]` with ISO dates.
pub fn read_series<R: Read>(reader: R) -> Result<MarketSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != COLUMNS[..4] && names != COLUMNS[..] {
        return Err(Error::Parse {
            line: 1,
            reason: format!("header must be {} with optional fees_usd, got {}", COLUMNS[..4].join(","), names.join(",")),
        });
    }
    let with_fees = names.len() == 5;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Parse { line, reason };
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| bad(format!("date {:?}: {e}", &record[0])))?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("{} {:?}: {e}", COLUMNS[k], &record[k])))
        };
        let fees_usd = if with_fees && !record[4].is_empty() { Some(num(4)?) } else { None };
        let row = Observation {
            date,
            hash_rate: num(1)?,
            reward_usd: num(2)?,
            price_usd: num(3)?,
            fees_usd,
        };
        for (k, v) in [(1, row.hash_rate), (2, row.reward_usd), (3, row.price_usd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(format!("{} must be non-negative, got {v}", COLUMNS[k])));
            }
        }
        if let Some(prev) = rows.last().map(|r: &Observation| r.date) {
            if date <= prev {
                return Err(bad(format!("date {date} does not follow {prev}")));
            }
        }
        rows.push(row);
    }
    MarketSeries::new(rows)
}

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_index(k: i64) -> Self {
        Self {
            year: k.div_euclid(12) as i32,
            month: (k.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn shift(self, months: i64) -> Self {
        Self::from_index(self.index() + months)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

fn month_sums(series: &MarketSeries, field: Field) -> BTreeMap<YearMonth, f64> {
    let mut acc: BTreeMap<YearMonth, (f64, usize)> = BTreeMap::new();
    for row in series.rows() {
        if let Some(v) = row.get(field) {
            let e = acc.entry(YearMonth::of(row.date)).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(m, (s, k))| (m, s / k as f64)).collect()
}

/// Arithmetic mean of each calendar month from the first to the last observation.
pub fn monthly_mean(series: &MarketSeries, field: Field) -> Result<Vec<(YearMonth, f64)>> {
    let (Some(first), Some(last)) = (series.first_date(), series.last_date()) else {
        return Ok(Vec::new());
    };
    let means = month_sums(series, field);
    let (a, b) = (YearMonth::of(first).index(), YearMonth::of(last).index());
    (a..=b)
        .map(|k| {
            let m = YearMonth::from_index(k);
            means.get(&m).map(|&v| (m, v)).ok_or_else(|| Error::EmptyMonth(m.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatedReturn {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub points: Vec<DatedReturn>,
    /// Evaluation dates lacking a month of history.
    pub omitted: Vec<NaiveDate>,
}

/// r(t) = mean(month(t) − lag) / mean(month(t) − 3 − lag) − 1 on the given dates.
pub fn three_month_returns(
    series: &MarketSeries,
    field: Field,
    eval_dates: &[NaiveDate],
    lag_months: u32,
) -> ReturnSeries {
    let means = month_sums(series, field);
    let lag = lag_months as i64;
    let mut out = ReturnSeries {
        points: Vec::new(),
        omitted: Vec::new(),
    };
    for &date in eval_dates {
        let m = YearMonth::of(date).shift(-lag);
        match (means.get(&m), means.get(&m.shift(-3))) {
            (Some(&now), Some(&then)) if then > 0.0 => out.points.push(DatedReturn {
                date,
                value: now / then - 1.0,
            }),
            _ => out.omitted.push(date),
        }
    }
    out
}

/// Dates every 14 days from the first observation whose month has `3 + lag_months`
/// months of history behind it.
pub fn biweekly_grid(series: &MarketSeries, lag_months: u32) -> Vec<NaiveDate> {
    let (Some(first), Some(last)) = (series.first_date(), series.last_date()) else {
        return Vec::new();
    };
    let start_month = YearMonth::of(first).shift(3 + lag_months as i64);
    let Some(anchor) = series.rows().iter().map(|r| r.date).find(|d| YearMonth::of(*d) >= start_month) else {
        return Vec::new();
    };
    std::iter::successors(Some(anchor), |d| d.checked_add_days(Days::new(14)))
        .take_while(|d| *d <= last)
        .collect()
}

/// Hash-rate returns and lagged regressor returns on the biweekly grid.
pub fn regression_returns(series: &MarketSeries, regressor: Field) -> (ReturnSeries, ReturnSeries) {
    let grid = biweekly_grid(series, 3);
    (
        three_month_returns(series, Field::HashRate, &grid, 0),
        three_month_returns(series, regressor, &grid, 3),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    pub residuals: Vec<f64>,
    pub beta_std_err: f64,
    pub beta_t_stat: f64,
}

/// OLS of log(1 + r_H) on an intercept and log(1 + r_R).
pub fn fit_loglog(r_h: &[f64], r_r: &[f64]) -> Result<RegressionFit> {
    if r_h.len() != r_r.len() {
        return Err(Error::invalid("returns", "series lengths differ"));
    }
    let labels: Vec<String> = (0..r_h.len()).map(|k| format!("#{k}")).collect();
    fit_labeled(r_h, r_r, &labels)
}

/// Pairs two return series by date and fits the log-log regression.
pub fn fit_loglog_dated(r_h: &ReturnSeries, r_r: &ReturnSeries) -> Result<RegressionFit> {
    let lagged: BTreeMap<NaiveDate, f64> = r_r.points.iter().map(|p| (p.date, p.value)).collect();
    let (mut y, mut x, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for p in &r_h.points {
        if let Some(&v) = lagged.get(&p.date) {
            y.push(p.value);
            x.push(v);
            labels.push(p.date.to_string());
        }
    }
    fit_labeled(&y, &x, &labels)
}

fn fit_labeled(r_h: &[f64], r_r: &[f64], labels: &[String]) -> Result<RegressionFit> {
    let n = r_h.len();
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    let offending: Vec<String> = (0..n)
        .filter(|&k| !(1.0 + r_h[k] > 0.0 && 1.0 + r_r[k] > 0.0))
        .map(|k| labels[k].clone())
        .collect();
    if !offending.is_empty() {
        return Err(Error::NonPositiveReturn(offending));
    }
    let y: Vec<f64> = r_h.iter().map(|r| r.ln_1p()).collect();
    let x: Vec<f64> = r_r.iter().map(|r| r.ln_1p()).collect();
    let (alpha_hat, beta_hat, r22) = qr_simple(&y, &x)?;

    let residuals: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| yi - alpha_hat - beta_hat * xi).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let beta_std_err = (ssr / (n - 2) as f64).sqrt() / r22;
    Ok(RegressionFit {
        alpha_hat,
        beta_hat,
        r_squared,
        n_obs: n,
        residuals,
        beta_std_err,
        beta_t_stat: beta_hat / beta_std_err,
    })
}

/// Least squares on [1, x] by Gram-Schmidt; returns (α, β, ‖x − x̄‖).
fn qr_simple(y: &[f64], x: &[f64]) -> Result<(f64, f64, f64)> {
    let n = y.len() as f64;
    let r11 = n.sqrt();
    let q1 = 1.0 / r11;
    let r12: f64 = x.iter().map(|v| v * q1).sum();
    let v: Vec<f64> = x.iter().map(|xi| xi - r12 * q1).collect();
    let r22 = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    if r22 == 0.0 {
        return Err(Error::invalid("returns", "regressor is constant"));
    }
    let z1: f64 = y.iter().map(|yi| yi * q1).sum();
    let z2: f64 = y.iter().zip(&v).map(|(yi, vi)| yi * vi / r22).sum();
    let beta = z2 / r22;
    let alpha = (z1 - r12 * beta) / r11;
    Ok((alpha, beta, r22))
}

/// Trailing seven-day means on a grid every `every_days` days from the first date.
pub fn seven_day_average(series: &MarketSeries, field: Field, every_days: u32) -> Result<Vec<(NaiveDate, f64)>> {
    if every_days == 0 {
        return Err(Error::invalid("every_days", "must be positive"));
    }
    let (Some(first), Some(last)) = (series.first_date(), series.last_date()) else {
        return Ok(Vec::new());
    };
    let rows = series.rows();
    let mut out = Vec::new();
    let grid = std::iter::successors(Some(first), |d| d.checked_add_days(Days::new(every_days as u64)));
    for t in grid.take_while(|d| *d <= last) {
        let start = t - Days::new(6);
        if start < first {
            continue;
        }
        let lo = rows.partition_point(|r| r.date < start);
        let hi = rows.partition_point(|r| r.date <= t);
        let values: Vec<f64> = rows[lo..hi].iter().filter_map(|r| r.get(field)).collect();
        if !values.is_empty() {
            out.push((t, values.iter().sum::<f64>() / values.len() as f64));
        }
    }
    Ok(out)
}
