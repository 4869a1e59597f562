//! Triple-barrier trend labeling over non-overlapping windows.
//!
//! Each window fixes an upper and lower price barrier at its start day from
//! that day's close and volatility, then scans forward day by day. The first
//! qualifying intraday touch (high for the upper barrier, low for the lower)
//! closes the window as Bullish or Bearish; reaching the vertical barrier
//! with no touch closes it as Neutral. The end day seeds the next window, so
//! windows tile the post-warmup range with no gap and no overlap.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{PriceSeries, VolatilitySeries};

/// Market-derived trend class with the canonical 0/1/2 encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendLabel {
    Bearish,
    Neutral,
    Bullish,
}

impl TrendLabel {
    /// Bearish = 0, Neutral = 1, Bullish = 2.
    pub fn encoding(&self) -> u8 {
        match self {
            TrendLabel::Bearish => 0,
            TrendLabel::Neutral => 1,
            TrendLabel::Bullish => 2,
        }
    }

    pub fn from_encoding(v: u8) -> Option<TrendLabel> {
        match v {
            0 => Some(TrendLabel::Bearish),
            1 => Some(TrendLabel::Neutral),
            2 => Some(TrendLabel::Bullish),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<TrendLabel> {
        match s {
            "bearish" => Some(TrendLabel::Bearish),
            "neutral" => Some(TrendLabel::Neutral),
            "bullish" => Some(TrendLabel::Bullish),
            _ => None,
        }
    }

    pub const ALL: [TrendLabel; 3] = [TrendLabel::Bearish, TrendLabel::Neutral, TrendLabel::Bullish];
}

impl std::fmt::Display for TrendLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrendLabel::Bearish => write!(f, "bearish"),
            TrendLabel::Neutral => write!(f, "neutral"),
            TrendLabel::Bullish => write!(f, "bullish"),
        }
    }
}

/// Barrier parameters: horizontal factors, vertical horizon, and the
/// minimum trend duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    pub f_upper: f64,
    pub f_lower: f64,
    pub v_max: usize,
    pub min_trend_days: usize,
}

impl BarrierConfig {
    pub fn new(f_upper: f64, f_lower: f64, v_max: usize, min_trend_days: usize) -> Result<Self> {
        if !(f_upper.is_finite() && f_upper > 0.0 && f_lower.is_finite() && f_lower > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "barrier factors must be positive, got ({f_upper}, {f_lower})"
            )));
        }
        if !(8..=15).contains(&v_max) {
            return Err(Error::InvalidConfig(format!(
                "vertical barrier must lie in [8, 15] days, got {v_max}"
            )));
        }
        if min_trend_days < 1 {
            return Err(Error::InvalidConfig(
                "minimum trend duration must be >= 1 day".into(),
            ));
        }
        if min_trend_days > v_max {
            return Err(Error::InvalidConfig(format!(
                "minimum trend duration {min_trend_days} exceeds vertical barrier {v_max}"
            )));
        }
        Ok(BarrierConfig {
            f_upper,
            f_lower,
            v_max,
            min_trend_days,
        })
    }
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            f_upper: 1.0,
            f_lower: 1.0,
            v_max: 8,
            min_trend_days: 2,
        }
    }
}

/// One labeled trend episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierWindow {
    pub start_day: NaiveDate,
    pub end_day: NaiveDate,
    pub deadline: NaiveDate,
    pub upper: f64,
    pub lower: f64,
    pub label: TrendLabel,
    pub touch_day: Option<NaiveDate>,
    pub truncated: bool,
}

/// Contiguous, non-overlapping barrier windows over a price range.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    windows: Vec<BarrierWindow>,
}

impl LabelSeries {
    pub fn windows(&self) -> &[BarrierWindow] {
        &self.windows
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.windows.first().map(|w| w.start_day)
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.windows.last().map(|w| w.end_day)
    }

    /// The window containing `day` under the half-open `[start, end)`
    /// convention, along with its position.
    pub fn window_containing(&self, day: NaiveDate) -> Option<(usize, &BarrierWindow)> {
        self.windows
            .iter()
            .enumerate()
            .find(|(_, w)| w.start_day <= day && day < w.end_day)
    }
}

/// Computes the horizontal barriers for one window start.
///
/// `upper = P * (1 + sigma * f_upper)`, `lower = P * (1 - sigma * f_lower)`.
/// A zero-width corridor (sigma = 0) or a non-positive lower barrier is a
/// degenerate-barrier error.
pub fn compute_barriers(entry_close: f64, sigma: f64, config: &BarrierConfig) -> Result<(f64, f64)> {
    if !(entry_close.is_finite() && entry_close > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "entry close must be positive, got {entry_close}"
        )));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "volatility must be non-negative, got {sigma}"
        )));
    }
    let upper = entry_close * (1.0 + sigma * config.f_upper);
    let lower = entry_close * (1.0 - sigma * config.f_lower);
    if sigma == 0.0 {
        return Err(Error::DegenerateBarrier(format!(
            "zero-width corridor at entry {entry_close}"
        )));
    }
    if lower <= 0.0 {
        return Err(Error::DegenerateBarrier(format!(
            "lower barrier {lower} is not positive (sigma {sigma} too large)"
        )));
    }
    Ok((upper, lower))
}

/// Outcome of scanning one window forward from its start index.
pub(crate) struct WindowScan {
    pub end_idx: usize,
    pub label: TrendLabel,
    pub touch_idx: Option<usize>,
    pub truncated: bool,
}

/// Scans `start+1 ..= start+v_max` for the first qualifying barrier touch.
/// Touches earlier than `start + min_trend_days` cannot close the window.
/// A same-day double touch resolves to the barrier nearer that day's open.
pub(crate) fn scan_window(
    prices: &PriceSeries,
    start_idx: usize,
    upper: f64,
    lower: f64,
    config: &BarrierConfig,
) -> WindowScan {
    let last_idx = prices.len() - 1;
    let deadline_idx = start_idx + config.v_max;
    let scan_end = deadline_idx.min(last_idx);
    for t in (start_idx + 1)..=scan_end {
        if t - start_idx >= config.min_trend_days {
            let candle = prices.get(t);
            let hit_upper = candle.high >= upper;
            let hit_lower = candle.low <= lower;
            let label = match (hit_upper, hit_lower) {
                (true, false) => Some(TrendLabel::Bullish),
                (false, true) => Some(TrendLabel::Bearish),
                (true, true) => {
                    // Daily bars cannot order intraday events; pick the
                    // barrier nearer the open.
                    if (candle.open - upper).abs() <= (candle.open - lower).abs() {
                        Some(TrendLabel::Bullish)
                    } else {
                        Some(TrendLabel::Bearish)
                    }
                }
                (false, false) => None,
            };
            if let Some(label) = label {
                return WindowScan {
                    end_idx: t,
                    label,
                    touch_idx: Some(t),
                    truncated: false,
                };
            }
        }
    }
    if deadline_idx <= last_idx {
        WindowScan {
            end_idx: deadline_idx,
            label: TrendLabel::Neutral,
            touch_idx: None,
            truncated: false,
        }
    } else {
        WindowScan {
            end_idx: last_idx,
            label: TrendLabel::Neutral,
            touch_idx: None,
            truncated: true,
        }
    }
}

/// Labels the post-warmup range of `prices` with sequential barrier windows.
///
/// The first window starts on the first day with defined volatility; each
/// subsequent window starts on its predecessor's end day. If the series is
/// exhausted mid-window, the final partial window is emitted as Neutral and
/// flagged `truncated`.
pub fn label_series(
    prices: &PriceSeries,
    vols: &VolatilitySeries,
    config: &BarrierConfig,
) -> Result<LabelSeries> {
    let first_vol_day = vols
        .first_day()
        .ok_or_else(|| Error::InsufficientHistory("volatility series is empty".into()))?;
    let mut start_idx = prices.index_of(first_vol_day).unwrap_or(0);
    if prices.index_of(first_vol_day).is_none() && first_vol_day > prices.last_day() {
        return Err(Error::InsufficientHistory(
            "volatility starts after the price range ends".into(),
        ));
    }
    let last_idx = prices.len() - 1;
    let mut windows = Vec::new();
    while start_idx < last_idx {
        let start_day = prices.day_at(start_idx);
        let sigma = vols.sigma_on(start_day).ok_or_else(|| {
            Error::InsufficientHistory(format!("volatility undefined at window start {start_day}"))
        })?;
        let entry = prices.close(start_idx);
        let (upper, lower) = compute_barriers(entry, sigma, config)?;
        let scan = scan_window(prices, start_idx, upper, lower, config);
        windows.push(BarrierWindow {
            start_day,
            end_day: prices.day_at(scan.end_idx),
            deadline: start_day + chrono::Duration::days(config.v_max as i64),
            upper,
            lower,
            label: scan.label,
            touch_day: scan.touch_idx.map(|i| prices.day_at(i)),
            truncated: scan.truncated,
        });
        start_idx = scan.end_idx;
    }
    if windows.is_empty() {
        return Err(Error::InsufficientHistory(
            "no room for a single barrier window past warmup".into(),
        ));
    }
    Ok(LabelSeries { windows })
}

/// Expands windows to a per-day label map: every day in `[start, end)`
/// carries its window's label.
pub fn daily_labels(series: &LabelSeries) -> BTreeMap<NaiveDate, TrendLabel> {
    let mut map = BTreeMap::new();
    for w in series.windows() {
        let mut day = w.start_day;
        while day < w.end_day {
            map.insert(day, w.label);
            day = day.succ_opt().expect("date overflow");
        }
    }
    map
}

/// Writes the window CSV contract:
/// `start,end,deadline,upper,lower,label,touch_day,truncated`.
pub fn write_windows_csv(series: &LabelSeries, path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: std::io::Error| Error::io(&path_str, e);
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    w.write_record(["start", "end", "deadline", "upper", "lower", "label", "touch_day", "truncated"])
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    for win in series.windows() {
        w.write_record([
            win.start_day.to_string(),
            win.end_day.to_string(),
            win.deadline.to_string(),
            win.upper.to_string(),
            win.lower.to_string(),
            win.label.to_string(),
            win.touch_day.map(|d| d.to_string()).unwrap_or_default(),
            win.truncated.to_string(),
        ])
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Writes the daily label CSV contract: `day,label`.
pub fn write_daily_csv(daily: &BTreeMap<NaiveDate, TrendLabel>, path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: std::io::Error| Error::io(&path_str, e);
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    w.write_record(["day", "label"])
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    for (day, label) in daily {
        w.write_record([day.to_string(), label.to_string()])
            .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads the `day,label` CSV back into a map.
pub fn read_daily_csv(path: impl AsRef<Path>) -> Result<BTreeMap<NaiveDate, TrendLabel>> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::io(&path_str, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())))?;
    let mut map = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow {
            path: path_str.clone(),
            line,
            reason: e.to_string(),
        })?;
        let day = NaiveDate::parse_from_str(rec.get(0).unwrap_or(""), "%Y-%m-%d").map_err(|e| {
            Error::MalformedRow {
                path: path_str.clone(),
                line,
                reason: format!("bad day: {e}"),
            }
        })?;
        let label = TrendLabel::parse(rec.get(1).unwrap_or("")).ok_or_else(|| Error::MalformedRow {
            path: path_str.clone(),
            line,
            reason: format!("bad label {:?}", rec.get(1).unwrap_or("")),
        })?;
        map.insert(day, label);
    }
    if map.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} has no label rows")));
    }
    Ok(map)
}
