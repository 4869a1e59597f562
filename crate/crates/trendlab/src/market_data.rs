//! OHLCV ingestion, returns, EWMA volatility, and the RSI/ROC indicators.
//!
//! A [`PriceSeries`] is a dense daily calendar: strictly increasing
//! timestamps with exactly one candle per day and no gaps. Everything
//! downstream (labeling, prompts, backtests) relies on that density, so
//! ingestion either rejects gaps or forward-fills them explicitly.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One daily OHLCV bar. `close` is the P_t used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub day: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    /// Checks the OHLC ordering invariants and non-negative volume.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.open.is_finite()
            && self.high.is_finite()
            && self.low.is_finite()
            && self.close.is_finite()
            && self.volume.is_finite())
        {
            return Err("non-finite field".to_string());
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        if self.volume < 0.0 {
            return Err(format!("negative volume {}", self.volume));
        }
        Ok(())
    }
}

/// How ingestion treats missing calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Missing days are an error (the default).
    #[default]
    Reject,
    /// Forward-fill the previous close with zero volume.
    ForwardFill,
}

/// Dense, strictly ordered daily candle series.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    candles: Vec<Candle>,
}

impl PriceSeries {
    /// Builds a series from candles already sorted by day.
    ///
    /// Rejects out-of-order or duplicated days, calendar gaps, and candles
    /// violating the OHLC invariants. Line numbers in errors refer to
    /// 1-based candle positions (header excluded).
    pub fn new(candles: Vec<Candle>) -> Result<Self> {
        Self::build(candles, GapPolicy::Reject)
    }

    /// Like [`PriceSeries::new`] but with an explicit gap policy.
    pub fn with_gap_policy(candles: Vec<Candle>, policy: GapPolicy) -> Result<Self> {
        Self::build(candles, policy)
    }

    fn build(candles: Vec<Candle>, policy: GapPolicy) -> Result<Self> {
        if candles.is_empty() {
            return Err(Error::EmptyInput("price series has no rows".into()));
        }
        let mut dense: Vec<Candle> = Vec::with_capacity(candles.len());
        for (i, c) in candles.into_iter().enumerate() {
            let line = i + 1;
            c.validate()
                .map_err(|reason| Error::OhlcInconsistent { line, reason })?;
            if let Some(prev) = dense.last() {
                if c.day == prev.day {
                    return Err(Error::DuplicateDay {
                        line,
                        day: c.day.to_string(),
                    });
                }
                if c.day < prev.day {
                    return Err(Error::NonMonotonicTimestamp {
                        line,
                        day: c.day.to_string(),
                    });
                }
                let gap = (c.day - prev.day).num_days() - 1;
                if gap > 0 {
                    match policy {
                        GapPolicy::Reject => {
                            return Err(Error::CalendarGap {
                                day: c.day.to_string(),
                                missing: gap,
                            });
                        }
                        GapPolicy::ForwardFill => {
                            let fill = prev.close;
                            let mut day = prev.day;
                            for _ in 0..gap {
                                day = day.succ_opt().expect("date overflow");
                                dense.push(Candle {
                                    day,
                                    open: fill,
                                    high: fill,
                                    low: fill,
                                    close: fill,
                                    volume: 0.0,
                                });
                            }
                        }
                    }
                }
            }
            dense.push(c);
        }
        Ok(PriceSeries { candles: dense })
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn candles(&self) -> &[Candle] {
        &self.candles
    }

    pub fn get(&self, idx: usize) -> &Candle {
        &self.candles[idx]
    }

    pub fn first_day(&self) -> NaiveDate {
        self.candles[0].day
    }

    pub fn last_day(&self) -> NaiveDate {
        self.candles[self.candles.len() - 1].day
    }

    /// Index of `day`, exploiting the dense calendar.
    pub fn index_of(&self, day: NaiveDate) -> Option<usize> {
        let offset = (day - self.first_day()).num_days();
        if offset < 0 || offset as usize >= self.candles.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    pub fn day_at(&self, idx: usize) -> NaiveDate {
        self.candles[idx].day
    }

    pub fn close(&self, idx: usize) -> f64 {
        self.candles[idx].close
    }

    /// Sub-series covering `[start, end)` by date. Both bounds are clamped
    /// to the available range; an empty intersection is an error.
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Result<PriceSeries> {
        let lo = self.index_of(start).unwrap_or(0);
        let hi = match self.index_of(end) {
            Some(i) => i,
            None if end > self.last_day() => self.candles.len(),
            None => 0,
        };
        if lo >= hi {
            return Err(Error::EmptyInput(format!(
                "price slice {start}..{end} is empty"
            )));
        }
        Ok(PriceSeries {
            candles: self.candles[lo..hi].to_vec(),
        })
    }

    /// Loads the `timestamp,open,high,low,close,volume` CSV contract.
    pub fn load_ohlcv(path: impl AsRef<Path>, policy: GapPolicy) -> Result<PriceSeries> {
        let path_str = path.as_ref().display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::io(
                    &path_str,
                    std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
                ),
                _ => Error::MalformedRow {
                    path: path_str.clone(),
                    line: 1,
                    reason: e.to_string(),
                },
            })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::MalformedRow {
                path: path_str.clone(),
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let expected = ["timestamp", "open", "high", "low", "close", "volume"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::MalformedRow {
                path: path_str,
                line: 1,
                reason: format!("header {:?} does not match {:?}", got.join(","), "timestamp,open,high,low,close,volume"),
            });
        }
        let mut rows: Vec<(usize, Candle)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2; // 1-based, header is line 1
            let record = record.map_err(|e| Error::MalformedRow {
                path: path_str.clone(),
                line,
                reason: e.to_string(),
            })?;
            let field = |idx: usize, name: &str| -> Result<&str> {
                record.get(idx).ok_or_else(|| Error::MalformedRow {
                    path: path_str.clone(),
                    line,
                    reason: format!("missing column {name}"),
                })
            };
            let day = NaiveDate::parse_from_str(field(0, "timestamp")?, "%Y-%m-%d").map_err(
                |e| Error::MalformedRow {
                    path: path_str.clone(),
                    line,
                    reason: format!("bad timestamp: {e}"),
                },
            )?;
            let mut nums = [0.0f64; 5];
            for (j, name) in ["open", "high", "low", "close", "volume"].iter().enumerate() {
                nums[j] = field(j + 1, name)?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::MalformedRow {
                        path: path_str.clone(),
                        line,
                        reason: format!("bad {name}: {e}"),
                    })?;
            }
            rows.push((
                line,
                Candle {
                    day,
                    open: nums[0],
                    high: nums[1],
                    low: nums[2],
                    close: nums[3],
                    volume: nums[4],
                },
            ));
        }
        // Re-map construction errors so they report file line numbers.
        let candles: Vec<Candle> = rows.iter().map(|(_, c)| *c).collect();
        Self::build(candles, policy).map_err(|e| match e {
            Error::OhlcInconsistent { line, reason } => Error::OhlcInconsistent {
                line: rows[line - 1].0,
                reason,
            },
            Error::DuplicateDay { line, day } => Error::DuplicateDay {
                line: rows[line - 1].0,
                day,
            },
            Error::NonMonotonicTimestamp { line, day } => Error::NonMonotonicTimestamp {
                line: rows[line - 1].0,
                day,
            },
            other => other,
        })
    }

    /// Writes the OHLCV CSV contract.
    pub fn write_ohlcv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path_str = path.as_ref().display().to_string();
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| {
            Error::io(
                &path_str,
                std::io::Error::other(e.to_string()),
            )
        })?;
        w.write_record(["timestamp", "open", "high", "low", "close", "volume"])
            .map_err(|e| Error::io(&path_str, std::io::Error::other(e.to_string())))?;
        for c in &self.candles {
            w.write_record([
                c.day.to_string(),
                c.open.to_string(),
                c.high.to_string(),
                c.low.to_string(),
                c.close.to_string(),
                c.volume.to_string(),
            ])
            .map_err(|e| Error::io(&path_str, std::io::Error::other(e.to_string())))?;
        }
        w.flush().map_err(|e| Error::io(&path_str, e))?;
        Ok(())
    }
}

/// Ordered `(day, value)` series of daily returns or other per-day reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    points: Vec<(NaiveDate, f64)>,
}

impl ReturnSeries {
    pub fn new(points: Vec<(NaiveDate, f64)>) -> Self {
        ReturnSeries { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|(_, v)| *v)
    }
}

/// Log returns r_t = ln(P_t / P_{t-1}), aligned to the later day of each pair.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientHistory(
            "log returns need at least two closes".into(),
        ));
    }
    let mut points = Vec::with_capacity(prices.len() - 1);
    for w in prices.candles().windows(2) {
        for c in w {
            if c.close <= 0.0 {
                return Err(Error::NonPositiveClose {
                    day: c.day.to_string(),
                    value: c.close,
                });
            }
        }
        points.push((w[1].day, (w[1].close / w[0].close).ln()));
    }
    Ok(ReturnSeries { points })
}

/// EWMA smoothing parameters; `alpha` is always `2 / (tau + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaParams {
    tau: usize,
    alpha: f64,
}

impl EwmaParams {
    pub fn new(tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidConfig("EWMA window length must be >= 1".into()));
        }
        Ok(EwmaParams {
            tau,
            alpha: 2.0 / (tau as f64 + 1.0),
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for EwmaParams {
    /// 30-day window, the study default.
    fn default() -> Self {
        EwmaParams::new(30).expect("30 is a valid window")
    }
}

/// Daily volatility estimates. Undefined for the first `warmup` days of
/// the originating price series.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    points: Vec<(NaiveDate, f64)>,
    warmup: usize,
}

impl VolatilitySeries {
    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.points.first().map(|(d, _)| *d)
    }

    /// Volatility on `day`, or `None` during warmup / outside the range.
    pub fn sigma_on(&self, day: NaiveDate) -> Option<f64> {
        let first = self.points.first()?.0;
        let offset = (day - first).num_days();
        if offset < 0 || offset as usize >= self.points.len() {
            None
        } else {
            Some(self.points[offset as usize].1)
        }
    }
}

/// Exponentially weighted volatility of log returns.
///
/// `sigma_t = sqrt( alpha / (1 - (1-alpha)^tau) * sum_{i=0..tau-1} (1-alpha)^i * r_{t-i}^2 )`
///
/// The most recent return carries weight `(1-alpha)^0` and the sum runs
/// over the `tau` most recent returns, so for constant returns the
/// normalization collapses and `sigma_t = |r|` exactly. The estimate is
/// undefined for the first `tau` days of the price calendar.
pub fn ewma_volatility(returns: &ReturnSeries, params: &EwmaParams) -> Result<VolatilitySeries> {
    let tau = params.tau();
    if returns.len() < tau {
        return Err(Error::InsufficientHistory(format!(
            "EWMA needs at least {tau} returns, got {}",
            returns.len()
        )));
    }
    let alpha = params.alpha();
    let decay = 1.0 - alpha;
    let norm = alpha / (1.0 - decay.powi(tau as i32));
    let pts = returns.points();
    let mut out = Vec::with_capacity(pts.len() - tau + 1);
    for t in (tau - 1)..pts.len() {
        let mut acc = 0.0;
        let mut weight = 1.0;
        for i in 0..tau {
            let r = pts[t - i].1;
            acc += weight * r * r;
            weight *= decay;
        }
        out.push((pts[t].0, (norm * acc).sqrt()));
    }
    Ok(VolatilitySeries {
        points: out,
        warmup: tau,
    })
}

/// Indicator family; the polarity of its descriptive terms differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    Rsi,
    Roc,
}

impl std::fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndicatorKind::Rsi => write!(f, "RSI"),
            IndicatorKind::Roc => write!(f, "ROC"),
        }
    }
}

/// Named indicator output over a (possibly shorter) daily range.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub kind: IndicatorKind,
    pub period: usize,
    points: Vec<(NaiveDate, f64)>,
}

impl IndicatorSeries {
    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    /// Value on `day`, exploiting the dense calendar.
    pub fn value_on(&self, day: NaiveDate) -> Option<f64> {
        let first = self.points.first()?.0;
        let offset = (day - first).num_days();
        if offset < 0 || offset as usize >= self.points.len() {
            None
        } else {
            Some(self.points[offset as usize].1)
        }
    }
}

/// Relative Strength Index with Wilder smoothing.
///
/// First value lands on the `period`-th day (needs `period + 1` closes);
/// all-gain runs pin 100, all-loss runs pin 0.
pub fn rsi(prices: &PriceSeries, period: usize) -> Result<IndicatorSeries> {
    if period == 0 {
        return Err(Error::InvalidConfig("RSI period must be >= 1".into()));
    }
    if prices.len() < period + 1 {
        return Err(Error::InsufficientHistory(format!(
            "RSI({period}) needs {} closes, got {}",
            period + 1,
            prices.len()
        )));
    }
    let candles = prices.candles();
    let mut gains = Vec::with_capacity(prices.len() - 1);
    let mut losses = Vec::with_capacity(prices.len() - 1);
    for w in candles.windows(2) {
        let delta = w[1].close - w[0].close;
        gains.push(delta.max(0.0));
        losses.push((-delta).max(0.0));
    }
    let mut avg_gain: f64 = gains[..period].iter().sum::<f64>() / period as f64;
    let mut avg_loss: f64 = losses[..period].iter().sum::<f64>() / period as f64;
    let rsi_of = |g: f64, l: f64| -> f64 {
        if l == 0.0 && g == 0.0 {
            50.0 // flat market: no directional pressure
        } else if l == 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    let mut points = Vec::with_capacity(prices.len() - period);
    points.push((candles[period].day, rsi_of(avg_gain, avg_loss)));
    for t in period..gains.len() {
        avg_gain = (avg_gain * (period as f64 - 1.0) + gains[t]) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + losses[t]) / period as f64;
        points.push((candles[t + 1].day, rsi_of(avg_gain, avg_loss)));
    }
    Ok(IndicatorSeries {
        kind: IndicatorKind::Rsi,
        period,
        points,
    })
}

/// Rate of Change: `(P_t - P_{t-period}) / P_{t-period}`.
pub fn roc(prices: &PriceSeries, period: usize) -> Result<IndicatorSeries> {
    if period == 0 {
        return Err(Error::InvalidConfig("ROC period must be >= 1".into()));
    }
    if prices.len() < period + 1 {
        return Err(Error::InsufficientHistory(format!(
            "ROC({period}) needs {} closes, got {}",
            period + 1,
            prices.len()
        )));
    }
    let candles = prices.candles();
    let mut points = Vec::with_capacity(prices.len() - period);
    for t in period..candles.len() {
        let base = candles[t - period].close;
        if base <= 0.0 {
            return Err(Error::NonPositiveClose {
                day: candles[t - period].day.to_string(),
                value: base,
            });
        }
        points.push((candles[t].day, (candles[t].close - base) / base));
    }
    Ok(IndicatorSeries {
        kind: IndicatorKind::Roc,
        period,
        points,
    })
}

/// Discretization band for an indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorThresholds {
    pub lower: f64,
    pub upper: f64,
}

impl IndicatorThresholds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidConfig(format!(
                "thresholds require lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(IndicatorThresholds { lower, upper })
    }

    /// The conventional RSI 30/70 band.
    pub fn rsi_default() -> Self {
        IndicatorThresholds {
            lower: 30.0,
            upper: 70.0,
        }
    }
}

/// ROC period used for threshold adaptation and the ROC indicator itself.
pub const ROC_PERIOD: usize = 8;

/// Symmetric ROC thresholds `(-k*s, +k*s)` where `s` is the sample standard
/// deviation of rolling 8-day compounded returns over the trailing `window`
/// observations.
pub fn roc_thresholds(returns: &ReturnSeries, window: usize, k: f64) -> Result<IndicatorThresholds> {
    if window < 2 {
        return Err(Error::InvalidConfig(
            "ROC threshold window must be >= 2".into(),
        ));
    }
    if k <= 0.0 {
        return Err(Error::InvalidConfig("ROC threshold k must be > 0".into()));
    }
    let pts = returns.points();
    if pts.len() < ROC_PERIOD + window - 1 {
        return Err(Error::InsufficientHistory(format!(
            "ROC thresholds need {} returns, got {}",
            ROC_PERIOD + window - 1,
            pts.len()
        )));
    }
    // Compounded 8-day return ending at t equals the 8-day ROC of closes.
    let mut compounded = Vec::with_capacity(pts.len() - ROC_PERIOD + 1);
    for t in (ROC_PERIOD - 1)..pts.len() {
        let sum: f64 = pts[t + 1 - ROC_PERIOD..=t].iter().map(|(_, r)| r).sum();
        compounded.push(sum.exp() - 1.0);
    }
    let tail = &compounded[compounded.len() - window..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (tail.len() as f64 - 1.0);
    let s = var.sqrt();
    if s == 0.0 {
        return Err(Error::DegenerateThresholds(
            "zero variance in 8-day returns".into(),
        ));
    }
    IndicatorThresholds::new(-k * s, k * s)
}

/// Descriptive trend term used in prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendTerm {
    Bearish,
    Neutral,
    Bullish,
}

impl std::fmt::Display for TrendTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrendTerm::Bearish => write!(f, "bearish"),
            TrendTerm::Neutral => write!(f, "neutral"),
            TrendTerm::Bullish => write!(f, "bullish"),
        }
    }
}

/// Maps an indicator value to a descriptive term.
///
/// RSI uses reversal polarity (overbought reads bearish); ROC uses momentum
/// polarity (positive momentum reads bullish).
pub fn discretize_indicator(
    value: f64,
    kind: IndicatorKind,
    thresholds: &IndicatorThresholds,
) -> TrendTerm {
    match kind {
        IndicatorKind::Rsi => {
            if value > thresholds.upper {
                TrendTerm::Bearish
            } else if value < thresholds.lower {
                TrendTerm::Bullish
            } else {
                TrendTerm::Neutral
            }
        }
        IndicatorKind::Roc => {
            if value > thresholds.upper {
                TrendTerm::Bullish
            } else if value < thresholds.lower {
                TrendTerm::Bearish
            } else {
                TrendTerm::Neutral
            }
        }
    }
}

/// Day offset helper for tests and synthetic calendars.
pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Adds `months` calendar months to `day`, clamping the day-of-month.
pub fn add_months(day: NaiveDate, months: u32) -> NaiveDate {
    let total = day.year() * 12 + day.month0() as i32 + months as i32;
    let (year, month0) = (total.div_euclid(12), total.rem_euclid(12) as u32);
    let mut dom = day.day();
    loop {
        if let Some(d) = NaiveDate::from_ymd_opt(year, month0 + 1, dom) {
            return d;
        }
        dom -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat_candle(day: NaiveDate, px: f64) -> Candle {
        Candle {
            day,
            open: px,
            high: px,
            low: px,
            close: px,
            volume: 1.0,
        }
    }

    fn series_from_closes(closes: &[f64]) -> PriceSeries {
        let start = date(2020, 1, 1);
        let candles = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| flat_candle(start + chrono::Duration::days(i as i64), c))
            .collect();
        PriceSeries::new(candles).unwrap()
    }

    #[test]
    fn log_returns_identity_case() {
        let prices = series_from_closes(&[100.0, 100.0]);
        let r = log_returns(&prices).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.points()[0].1, 0.0);
    }

    #[test]
    fn log_returns_direct_formula() {
        let prices = series_from_closes(&[100.0, 110.0]);
        let r = log_returns(&prices).unwrap();
        assert!((r.points()[0].1 - 0.09531017980432493).abs() < 1e-12);
    }

    #[test]
    fn log_returns_two_steps() {
        // ln(1.1) and ln(0.9), evaluated independently of the implementation.
        let prices = series_from_closes(&[100.0, 110.0, 99.0]);
        let r = log_returns(&prices).unwrap();
        assert!((r.points()[0].1 - 0.09531017980432493).abs() < 1e-12);
        assert!((r.points()[1].1 - (-0.10536051565782628)).abs() < 1e-12);
    }

    #[test]
    fn log_returns_rejects_non_positive_close() {
        // OHLC ordering does not force positive prices; the returns
        // operation is where positivity is required.
        let start = date(2020, 1, 1);
        let candles = vec![flat_candle(start, 100.0), flat_candle(start + chrono::Duration::days(1), 0.0)];
        let prices = PriceSeries::new(candles).unwrap();
        assert!(matches!(
            log_returns(&prices),
            Err(Error::NonPositiveClose { .. })
        ));
    }

    #[test]
    fn price_series_rejects_ohlc_inconsistency() {
        let start = date(2020, 1, 1);
        let bad = Candle {
            day: start,
            open: 99.5,
            high: 99.0,
            low: 100.0,
            close: 99.5,
            volume: 1.0,
        };
        match PriceSeries::new(vec![bad]) {
            Err(Error::OhlcInconsistent { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected OHLC error, got {other:?}"),
        }
    }

    #[test]
    fn price_series_rejects_duplicate_day() {
        let d = date(2020, 1, 1);
        let candles = vec![flat_candle(d, 1.0), flat_candle(d, 2.0)];
        assert!(matches!(
            PriceSeries::new(candles),
            Err(Error::DuplicateDay { line: 2, .. })
        ));
    }

    #[test]
    fn price_series_rejects_gap_and_forward_fills() {
        let d0 = date(2020, 1, 1);
        let d2 = date(2020, 1, 3);
        let candles = vec![flat_candle(d0, 10.0), flat_candle(d2, 12.0)];
        assert!(matches!(
            PriceSeries::new(candles.clone()),
            Err(Error::CalendarGap { missing: 1, .. })
        ));
        let filled = PriceSeries::with_gap_policy(candles, GapPolicy::ForwardFill).unwrap();
        assert_eq!(filled.len(), 3);
        assert_eq!(filled.get(1).close, 10.0);
        assert_eq!(filled.get(1).volume, 0.0);
        assert_eq!(filled.get(1).day, date(2020, 1, 2));
    }

    fn returns_from_values(values: &[f64]) -> ReturnSeries {
        let start = date(2020, 2, 1);
        ReturnSeries::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (start + chrono::Duration::days(i as i64), v))
                .collect(),
        )
    }

    #[test]
    fn ewma_zero_returns_zero_sigma() {
        let r = returns_from_values(&[0.0; 40]);
        let v = ewma_volatility(&r, &EwmaParams::new(30).unwrap()).unwrap();
        assert!(v.points().iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn ewma_constant_returns_collapse_exactly() {
        // sum of weights times the normalization telescopes to 1, so
        // sigma = |r| for every post-warmup day.
        let r = returns_from_values(&[0.02; 30]);
        let v = ewma_volatility(&r, &EwmaParams::new(30).unwrap()).unwrap();
        assert_eq!(v.points().len(), 1);
        assert!((v.points()[0].1 - 0.02).abs() < 1e-12);

        let longer = returns_from_values(&[0.02; 75]);
        let v = ewma_volatility(&longer, &EwmaParams::new(30).unwrap()).unwrap();
        for (_, s) in v.points() {
            assert!((s - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn ewma_hand_worked_tau_two() {
        // tau=2, alpha=2/3: sigma = sqrt(0.75*(0.0004 + (1/3)*0.0001))
        let r = returns_from_values(&[0.01, -0.02]);
        let v = ewma_volatility(&r, &EwmaParams::new(2).unwrap()).unwrap();
        assert_eq!(v.points().len(), 1);
        assert!((v.points()[0].1 - 0.01802775637731995).abs() < 1e-12);
    }

    #[test]
    fn ewma_rejects_short_series() {
        let r = returns_from_values(&[0.01; 10]);
        assert!(matches!(
            ewma_volatility(&r, &EwmaParams::new(30).unwrap()),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn rsi_monotone_endpoints() {
        let up: Vec<f64> = (0..15).map(|i| 100.0 + i as f64).collect();
        let v = rsi(&series_from_closes(&up), 14).unwrap();
        assert_eq!(v.points().len(), 1);
        assert_eq!(v.points()[0].1, 100.0);

        let down: Vec<f64> = (0..15).map(|i| 100.0 - i as f64).collect();
        let v = rsi(&series_from_closes(&down), 14).unwrap();
        assert_eq!(v.points()[0].1, 0.0);
    }

    /// Spreadsheet-style Wilder recursion, written step by step and kept
    /// independent of the production code path.
    fn rsi_oracle(closes: &[f64], period: usize) -> Vec<f64> {
        let mut gains = vec![];
        let mut losses = vec![];
        for i in 1..closes.len() {
            let d = closes[i] - closes[i - 1];
            if d >= 0.0 {
                gains.push(d);
                losses.push(0.0);
            } else {
                gains.push(0.0);
                losses.push(-d);
            }
        }
        let mut out = vec![];
        let mut ag = 0.0;
        let mut al = 0.0;
        for i in 0..period {
            ag += gains[i];
            al += losses[i];
        }
        ag /= period as f64;
        al /= period as f64;
        let to_rsi = |ag: f64, al: f64| {
            if al == 0.0 && ag == 0.0 {
                50.0
            } else if al == 0.0 {
                100.0
            } else {
                let rs = ag / al;
                100.0 - 100.0 / (1.0 + rs)
            }
        };
        out.push(to_rsi(ag, al));
        for i in period..gains.len() {
            ag = (ag * (period as f64 - 1.0) + gains[i]) / period as f64;
            al = (al * (period as f64 - 1.0) + losses[i]) / period as f64;
            out.push(to_rsi(ag, al));
        }
        out
    }

    #[test]
    fn rsi_matches_step_by_step_recursion() {
        // Fixed 20-price reference path with both gains and losses.
        let closes = [
            44.34, 44.09, 44.15, 43.61, 44.33, 44.83, 45.10, 45.42, 45.84, 46.08, 45.89, 46.03,
            45.61, 46.28, 46.28, 46.00, 46.03, 46.41, 46.22, 45.64,
        ];
        let got = rsi(&series_from_closes(&closes), 14).unwrap();
        let want = rsi_oracle(&closes, 14);
        assert_eq!(got.points().len(), want.len());
        for ((_, g), w) in got.points().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "got {g}, want {w}");
        }
        // First value frozen from the oracle (classic Wilder worked example).
        assert!((got.points()[0].1 - 70.46413502109705).abs() < 1e-9);
    }

    #[test]
    fn rsi_stays_in_bounds() {
        let closes: Vec<f64> = (0..60)
            .map(|i| 100.0 + (i as f64 * 0.7).sin() * 5.0)
            .collect();
        let v = rsi(&series_from_closes(&closes), 14).unwrap();
        for (_, x) in v.points() {
            assert!((0.0..=100.0).contains(x));
        }
    }

    #[test]
    fn roc_identity_and_direct() {
        let mut closes = vec![100.0; 9];
        let v = roc(&series_from_closes(&closes), 8).unwrap();
        assert_eq!(v.points()[0].1, 0.0);

        closes[8] = 110.0;
        let v = roc(&series_from_closes(&closes), 8).unwrap();
        assert!((v.points()[0].1 - 0.10).abs() < 1e-12);
    }

    #[test]
    fn roc_single_jump_affects_exactly_eight_windows() {
        // Flat path with one +5% jump: brute-force sliding window says the
        // jump shows up in exactly 8 ROC values.
        let mut closes = vec![100.0; 30];
        for c in closes.iter_mut().skip(15) {
            *c = 105.0;
        }
        let series = series_from_closes(&closes);
        let got = roc(&series, 8).unwrap();
        let brute: Vec<f64> = (8..closes.len())
            .map(|t| (closes[t] - closes[t - 8]) / closes[t - 8])
            .collect();
        let nonzero = brute.iter().filter(|x| **x != 0.0).count();
        assert_eq!(nonzero, 8);
        for ((_, g), b) in got.points().iter().zip(brute.iter()) {
            assert_eq!(g, b);
        }
    }

    #[test]
    fn roc_thresholds_known_spread() {
        // Eight zero returns then one chosen so the two 8-day compounded
        // values are {0, 0.05*sqrt(2)}; their sample std is exactly 0.05.
        let b = 0.05 * std::f64::consts::SQRT_2;
        let mut vals = vec![0.0; 8];
        vals.push((1.0 + b).ln());
        let th = roc_thresholds(&returns_from_values(&vals), 2, 1.0).unwrap();
        assert!((th.upper - 0.05).abs() < 1e-12);
        assert!((th.lower + 0.05).abs() < 1e-12);
    }

    #[test]
    fn roc_thresholds_match_two_pass_oracle() {
        // Independent two-pass variance over the same rolling windows.
        let vals: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) / 300.0).collect();
        let window = 20;
        let k = 1.5;
        let th = roc_thresholds(&returns_from_values(&vals), window, k).unwrap();

        let mut comp = vec![];
        for t in 7..vals.len() {
            let mut s = 0.0;
            for r in &vals[t - 7..=t] {
                s += r;
            }
            comp.push(s.exp() - 1.0);
        }
        let tail = &comp[comp.len() - window..];
        let mean: f64 = tail.iter().sum::<f64>() / window as f64;
        let mut acc = 0.0;
        for x in tail {
            acc += (x - mean) * (x - mean);
        }
        let s = (acc / (window as f64 - 1.0)).sqrt();
        assert!((th.upper - k * s).abs() < 1e-12);
        assert!((th.lower + k * s).abs() < 1e-12);
    }

    #[test]
    fn roc_thresholds_reject_zero_variance() {
        let vals = vec![0.0; 40];
        assert!(matches!(
            roc_thresholds(&returns_from_values(&vals), 10, 1.0),
            Err(Error::DegenerateThresholds(_))
        ));
    }

    #[test]
    fn discretize_polarity() {
        let rsi_th = IndicatorThresholds::rsi_default();
        assert_eq!(
            discretize_indicator(75.0, IndicatorKind::Rsi, &rsi_th),
            TrendTerm::Bearish
        );
        assert_eq!(
            discretize_indicator(50.0, IndicatorKind::Rsi, &rsi_th),
            TrendTerm::Neutral
        );
        assert_eq!(
            discretize_indicator(20.0, IndicatorKind::Rsi, &rsi_th),
            TrendTerm::Bullish
        );
        let roc_th = IndicatorThresholds::new(-0.05, 0.05).unwrap();
        assert_eq!(
            discretize_indicator(0.08, IndicatorKind::Roc, &roc_th),
            TrendTerm::Bullish
        );
        assert_eq!(
            discretize_indicator(-0.08, IndicatorKind::Roc, &roc_th),
            TrendTerm::Bearish
        );
        assert_eq!(
            discretize_indicator(0.0, IndicatorKind::Roc, &roc_th),
            TrendTerm::Neutral
        );
    }

    #[test]
    fn add_months_clamps_day() {
        assert_eq!(add_months(date(2020, 1, 31), 1), date(2020, 2, 29));
        assert_eq!(add_months(date(2020, 8, 15), 6), date(2021, 2, 15));
    }

    #[test]
    fn load_ohlcv_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prices.csv");
        std::fs::write(
            &path,
            "timestamp,open,high,low,close,volume\n\
             2020-01-01,10,11,9,10.5,100\n\
             2020-01-02,10.5,12,10,11,150\n\
             2020-01-03,11,11.5,10.5,11.2,90\n",
        )
        .unwrap();
        let series = PriceSeries::load_ohlcv(&path, GapPolicy::Reject).unwrap();
        assert_eq!(series.len(), 3);
        assert!(series
            .candles()
            .windows(2)
            .all(|w| w[0].day < w[1].day));
    }

    #[test]
    fn load_ohlcv_reports_inconsistent_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "timestamp,open,high,low,close,volume\n\
             2020-01-01,10,11,9,10.5,100\n\
             2020-01-02,99.5,99,100,99.5,1\n",
        )
        .unwrap();
        match PriceSeries::load_ohlcv(&path, GapPolicy::Reject) {
            Err(Error::OhlcInconsistent { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected OHLC error, got {other:?}"),
        }
    }

    #[test]
    fn load_ohlcv_reports_duplicate_day() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(
            &path,
            "timestamp,open,high,low,close,volume\n\
             2020-01-01,10,11,9,10.5,100\n\
             2020-01-01,10,11,9,10.6,100\n",
        )
        .unwrap();
        match PriceSeries::load_ohlcv(&path, GapPolicy::Reject) {
            Err(Error::DuplicateDay { line, day }) => {
                assert_eq!(line, 3);
                assert_eq!(day, "2020-01-01");
            }
            other => panic!("expected duplicate-day error, got {other:?}"),
        }
    }

    #[test]
    fn load_ohlcv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "date,o,h,l,c,v\n2020-01-01,1,1,1,1,1\n").unwrap();
        assert!(matches!(
            PriceSeries::load_ohlcv(&path, GapPolicy::Reject),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn telescoping_log_returns(closes in proptest::collection::vec(1.0f64..1000.0, 2..80)) {
            let prices = series_from_closes(&closes);
            let r = log_returns(&prices).unwrap();
            let total: f64 = r.values().sum();
            let reconstructed = total.exp() * closes[0];
            let last = *closes.last().unwrap();
            prop_assert!((reconstructed - last).abs() / last < 1e-9);
        }

        #[test]
        fn ewma_is_shift_equivariant(
            vals in proptest::collection::vec(-0.1f64..0.1, 12..60),
            extra in -0.1f64..0.1,
        ) {
            let tau = 10;
            let params = EwmaParams::new(tau).unwrap();
            let base = ewma_volatility(&returns_from_values(&vals), &params).unwrap();
            let mut extended = vals.clone();
            extended.push(extra);
            let ext = ewma_volatility(&returns_from_values(&extended), &params).unwrap();
            for (a, b) in base.points().iter().zip(ext.points().iter()) {
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(ext.points().len(), base.points().len() + 1);
        }

        #[test]
        fn rsi_bounded_for_random_walks(steps in proptest::collection::vec(-5.0f64..5.0, 20..100)) {
            let mut px = 500.0;
            let closes: Vec<f64> = steps.iter().map(|s| { px = (px + s).max(1.0); px }).collect();
            let v = rsi(&series_from_closes(&closes), 14).unwrap();
            for (_, x) in v.points() {
                prop_assert!((0.0..=100.0).contains(x));
            }
        }

        #[test]
        fn discretize_total_partition(value in -1.0f64..101.0) {
            let th = IndicatorThresholds::new(30.0, 70.0).unwrap();
            let term = discretize_indicator(value, IndicatorKind::Rsi, &th);
            let again = discretize_indicator(value, IndicatorKind::Rsi, &th);
            prop_assert_eq!(term, again);
        }
    }
}
