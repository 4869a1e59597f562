//! Daily signal aggregation from per-tweet predictions.
//!
//! Two aggregation rules: majority (plurality class count, confidence =
//! majority share) and mean (thresholded average of the 0/1/2 class
//! encodings, confidence = distance from the crossed threshold). Raw
//! confidences are min-max normalized over a trailing window ending the
//! prior day, so position sizing never sees future data.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_in_out, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::labeling::TrendLabel;
use crate::market_data::{add_months, PriceSeries};
use crate::optimizer::{sharpe_ratio, SharpeParams};

/// One classifier prediction for one tweet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tweet_id: String,
    pub day: NaiveDate,
    #[serde(rename = "class")]
    pub predicted: TrendLabel,
    /// Class probabilities ordered (bearish, neutral, bullish).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<u8>,
}

impl Prediction {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.probs {
            if p.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::InvalidPredictions(format!(
                    "negative or non-finite probability for tweet {}",
                    self.tweet_id
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPredictions(format!(
                    "probabilities for tweet {} sum to {sum}",
                    self.tweet_id
                )));
            }
        }
        if let Some(f) = self.fold {
            if f > 4 {
                return Err(Error::InvalidPredictions(format!(
                    "fold {f} out of range 0-4 for tweet {}",
                    self.tweet_id
                )));
            }
        }
        Ok(())
    }
}

/// Aggregation rule tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMethod {
    Majority,
    Mean,
}

impl AggregationMethod {
    pub fn parse(s: &str) -> Option<AggregationMethod> {
        match s {
            "majority" => Some(AggregationMethod::Majority),
            "mean" => Some(AggregationMethod::Mean),
            _ => None,
        }
    }
}

impl std::fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregationMethod::Majority => write!(f, "majority"),
            AggregationMethod::Mean => write!(f, "mean"),
        }
    }
}

/// One day's aggregated signal. Days with no predictions carry Neutral
/// with zero confidence and zero counts (`n() == 0` is the flag).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyAggregate {
    pub day: NaiveDate,
    /// Counts indexed by encoding: (bearish, neutral, bullish).
    pub counts: [u64; 3],
    pub mean_encoding: Option<f64>,
    pub signal: TrendLabel,
    pub confidence_raw: f64,
    pub confidence: f64,
}

impl DailyAggregate {
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn empty(day: NaiveDate) -> DailyAggregate {
        DailyAggregate {
            day,
            counts: [0, 0, 0],
            mean_encoding: None,
            signal: TrendLabel::Neutral,
            confidence_raw: 0.0,
            confidence: 0.0,
        }
    }
}

/// Mean-method decision thresholds on the 0..2 encoding axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanThresholds {
    pub t_bearish: f64,
    pub t_bullish: f64,
}

impl MeanThresholds {
    pub fn new(t_bearish: f64, t_bullish: f64) -> Result<Self> {
        if !(0.0 <= t_bearish && t_bearish < t_bullish && t_bullish <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "mean thresholds require 0 <= t_bearish < t_bullish <= 2, got ({t_bearish}, {t_bullish})"
            )));
        }
        Ok(MeanThresholds {
            t_bearish,
            t_bullish,
        })
    }
}

impl Default for MeanThresholds {
    fn default() -> Self {
        MeanThresholds {
            t_bearish: 0.9,
            t_bullish: 1.1,
        }
    }
}

/// Dense per-day aggregate series plus the method that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub method: AggregationMethod,
    days: Vec<DailyAggregate>,
}

impl SignalSeries {
    /// Assembles a series from pre-built aggregates; days must form a
    /// dense calendar.
    pub fn from_parts(method: AggregationMethod, days: Vec<DailyAggregate>) -> SignalSeries {
        debug_assert!(days
            .windows(2)
            .all(|w| (w[1].day - w[0].day).num_days() == 1));
        SignalSeries { method, days }
    }

    pub fn days(&self) -> &[DailyAggregate] {
        &self.days
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.days.first().map(|d| d.day)
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.days.last().map(|d| d.day)
    }

    pub fn get(&self, idx: usize) -> &DailyAggregate {
        &self.days[idx]
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Collapses the per-fold predictions of one tweet to a single prediction
/// by plurality; ties resolve to Neutral. Probabilities are averaged when
/// every fold provides them.
pub fn fold_ensemble(per_fold: &[Prediction]) -> Result<Prediction> {
    if per_fold.is_empty() {
        return Err(Error::EmptyInput("fold ensemble needs >= 1 prediction".into()));
    }
    if per_fold.len() > 5 {
        return Err(Error::InvalidPredictions(format!(
            "fold ensemble accepts at most 5 predictions, got {}",
            per_fold.len()
        )));
    }
    let id = &per_fold[0].tweet_id;
    let day = per_fold[0].day;
    for p in per_fold {
        if &p.tweet_id != id {
            return Err(Error::InvalidPredictions(format!(
                "mixed tweet ids in fold ensemble: {} vs {}",
                id, p.tweet_id
            )));
        }
        if p.day != day {
            return Err(Error::InvalidPredictions(format!(
                "tweet {id} carries inconsistent days across folds"
            )));
        }
    }
    let mut counts = [0u64; 3];
    for p in per_fold {
        counts[p.predicted.encoding() as usize] += 1;
    }
    let predicted = plurality(&counts);
    let probs = if per_fold.iter().all(|p| p.probs.is_some()) {
        let mut acc = [0.0f64; 3];
        for p in per_fold {
            for (a, b) in acc.iter_mut().zip(p.probs.unwrap().iter()) {
                *a += b;
            }
        }
        let n = per_fold.len() as f64;
        Some([acc[0] / n, acc[1] / n, acc[2] / n])
    } else {
        None
    };
    Ok(Prediction {
        tweet_id: id.clone(),
        day,
        predicted,
        probs,
        fold: None,
    })
}

/// Argmax over class counts; a shared maximum resolves to Neutral.
fn plurality(counts: &[u64; 3]) -> TrendLabel {
    let max = *counts.iter().max().unwrap();
    let winners: Vec<usize> = (0..3).filter(|&i| counts[i] == max).collect();
    if winners.len() == 1 {
        TrendLabel::from_encoding(winners[0] as u8).unwrap()
    } else {
        TrendLabel::Neutral
    }
}

fn check_same_day(preds: &[Prediction]) -> Result<NaiveDate> {
    let day = preds
        .first()
        .ok_or_else(|| Error::EmptyInput("aggregation needs >= 1 prediction".into()))?
        .day;
    if preds.iter().any(|p| p.day != day) {
        return Err(Error::InvalidPredictions(
            "aggregation input spans multiple days".into(),
        ));
    }
    Ok(day)
}

fn class_counts(preds: &[Prediction]) -> [u64; 3] {
    let mut counts = [0u64; 3];
    for p in preds {
        counts[p.predicted.encoding() as usize] += 1;
    }
    counts
}

fn mean_encoding(preds: &[Prediction]) -> f64 {
    // Integer accumulation keeps the mean exact up to the final division.
    let sum: u64 = preds.iter().map(|p| p.predicted.encoding() as u64).sum();
    sum as f64 / preds.len() as f64
}

/// Majority aggregation: plurality signal and majority-share confidence.
pub fn aggregate_majority(day_predictions: &[Prediction]) -> Result<DailyAggregate> {
    let day = check_same_day(day_predictions)?;
    let counts = class_counts(day_predictions);
    let n = day_predictions.len() as u64;
    let signal = plurality(&counts);
    let confidence_raw = *counts.iter().max().unwrap() as f64 / n as f64;
    Ok(DailyAggregate {
        day,
        counts,
        mean_encoding: Some(mean_encoding(day_predictions)),
        signal,
        confidence_raw,
        confidence: confidence_raw.clamp(0.0, 1.0),
    })
}

/// Mean aggregation: thresholded average encoding.
///
/// Confidence is the distance from the crossed threshold, or the distance
/// to the nearer threshold when the mean sits inside the Neutral band.
pub fn aggregate_mean(
    day_predictions: &[Prediction],
    thresholds: &MeanThresholds,
) -> Result<DailyAggregate> {
    let day = check_same_day(day_predictions)?;
    let counts = class_counts(day_predictions);
    let d_mean = mean_encoding(day_predictions);
    let (signal, confidence_raw) = if d_mean < thresholds.t_bearish {
        (TrendLabel::Bearish, (d_mean - thresholds.t_bearish).abs())
    } else if d_mean > thresholds.t_bullish {
        (TrendLabel::Bullish, (d_mean - thresholds.t_bullish).abs())
    } else {
        let dist = (d_mean - thresholds.t_bearish)
            .abs()
            .min((d_mean - thresholds.t_bullish).abs());
        (TrendLabel::Neutral, dist)
    };
    Ok(DailyAggregate {
        day,
        counts,
        mean_encoding: Some(d_mean),
        signal,
        confidence_raw,
        confidence: confidence_raw.clamp(0.0, 1.0),
    })
}

/// Min-max normalizes confidences over a trailing window of raw values
/// ending the prior day. Only days that actually saw predictions enter
/// the window; a degenerate window (fewer than two observations, or
/// max == min) maps to 0.5. Empty days keep confidence 0.
pub fn normalize_confidence(series: &SignalSeries, window: usize) -> Result<SignalSeries> {
    if window < 2 {
        return Err(Error::InvalidConfig(
            "normalization window must be >= 2 days".into(),
        ));
    }
    let days = series.days();
    let mut out = Vec::with_capacity(days.len());
    for (i, agg) in days.iter().enumerate() {
        let mut normalized = agg.clone();
        if agg.n() == 0 {
            normalized.confidence = 0.0;
        } else {
            let lo_idx = i.saturating_sub(window);
            let pool: Vec<f64> = days[lo_idx..i]
                .iter()
                .filter(|d| d.n() > 0)
                .map(|d| d.confidence_raw)
                .collect();
            normalized.confidence = if pool.len() < 2 {
                0.5
            } else {
                let min = pool.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = pool.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max == min {
                    0.5
                } else {
                    ((agg.confidence_raw - min) / (max - min)).clamp(0.0, 1.0)
                }
            };
        }
        out.push(normalized);
    }
    Ok(SignalSeries {
        method: series.method,
        days: out,
    })
}

/// Piecewise-constant threshold assignment over the calendar: each entry
/// applies from its start day until the next entry takes over.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    fallback: MeanThresholds,
    entries: Vec<(NaiveDate, MeanThresholds)>,
}

impl ThresholdSchedule {
    pub fn fixed(thresholds: MeanThresholds) -> Self {
        ThresholdSchedule {
            fallback: thresholds,
            entries: vec![],
        }
    }

    /// Walk-forward application of fitted periods: thresholds fitted on
    /// interval k take effect at interval k's end (the start of k+1); the
    /// fallback covers days before the first fitted interval ends.
    pub fn walk_forward(fitted: &[ThresholdPeriod], fallback: MeanThresholds) -> Self {
        ThresholdSchedule {
            fallback,
            entries: fitted.iter().map(|p| (p.end, p.thresholds)).collect(),
        }
    }

    pub fn thresholds_for(&self, day: NaiveDate) -> MeanThresholds {
        let mut current = self.fallback;
        for (start, th) in &self.entries {
            if *start <= day {
                current = *th;
            } else {
                break;
            }
        }
        current
    }
}

/// Options for assembling a dense signal series from raw predictions.
#[derive(Debug, Clone)]
pub struct SignalOptions {
    pub method: AggregationMethod,
    pub thresholds: ThresholdSchedule,
    /// Trailing min-max window in days.
    pub normalize_window: usize,
}

impl Default for SignalOptions {
    fn default() -> Self {
        SignalOptions {
            method: AggregationMethod::Majority,
            thresholds: ThresholdSchedule::fixed(MeanThresholds::default()),
            normalize_window: 180,
        }
    }
}

/// Groups predictions by tweet (collapsing folds), then by day, aggregates
/// each day over the dense `range` calendar, and normalizes confidences.
pub fn build_signal_series(
    predictions: &[Prediction],
    range: (NaiveDate, NaiveDate),
    opts: &SignalOptions,
) -> Result<SignalSeries> {
    let (start, end) = range;
    if start > end {
        return Err(Error::InvalidConfig(format!(
            "signal range {start}..{end} is inverted"
        )));
    }
    // Collapse multi-fold tweets first.
    let mut by_tweet: BTreeMap<&str, Vec<&Prediction>> = BTreeMap::new();
    for p in predictions {
        by_tweet.entry(p.tweet_id.as_str()).or_default().push(p);
    }
    let mut collapsed: Vec<Prediction> = Vec::with_capacity(by_tweet.len());
    for (_, group) in by_tweet {
        if group.len() == 1 {
            collapsed.push(group[0].clone());
        } else {
            let owned: Vec<Prediction> = group.into_iter().cloned().collect();
            collapsed.push(fold_ensemble(&owned)?);
        }
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<Prediction>> = BTreeMap::new();
    for p in collapsed {
        by_day.entry(p.day).or_default().push(p);
    }
    let mut days = Vec::new();
    let mut day = start;
    while day <= end {
        let agg = match by_day.get(&day) {
            Some(preds) => match opts.method {
                AggregationMethod::Majority => aggregate_majority(preds)?,
                AggregationMethod::Mean => {
                    aggregate_mean(preds, &opts.thresholds.thresholds_for(day))?
                }
            },
            None => DailyAggregate::empty(day),
        };
        days.push(agg);
        day = day.succ_opt().expect("date overflow");
    }
    let series = SignalSeries {
        method: opts.method,
        days,
    };
    normalize_confidence(&series, opts.normalize_window)
}

/// One fitted mean-threshold period (half-open `[start, end)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPeriod {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub thresholds: MeanThresholds,
    pub sharpe: f64,
}

/// Candidate threshold values for the periodic optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub values: Vec<f64>,
}

impl Default for ThresholdGrid {
    /// 0.60, 0.65, ..., 1.40 — a symmetric bracket around the Neutral
    /// encoding of 1.
    fn default() -> Self {
        ThresholdGrid {
            values: (0..=16).map(|i| 0.6 + 0.05 * i as f64).collect(),
        }
    }
}

/// Grid-searches `(t_bearish, t_bullish)` per six-month interval,
/// maximizing the Sharpe ratio of the In-Out-Long strategy driven by the
/// resulting mean signals on that interval. Fitted periods are meant to be
/// applied walk-forward via [`ThresholdSchedule::walk_forward`].
pub fn optimize_mean_thresholds(
    predictions: &[Prediction],
    prices: &PriceSeries,
    grid: &ThresholdGrid,
    interval_months: u32,
    sharpe_params: &SharpeParams,
) -> Result<Vec<ThresholdPeriod>> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no predictions to optimize over".into()));
    }
    if interval_months == 0 {
        return Err(Error::InvalidConfig("interval length must be >= 1 month".into()));
    }
    let first = predictions.iter().map(|p| p.day).min().unwrap().max(prices.first_day());
    let last = predictions.iter().map(|p| p.day).max().unwrap().min(prices.last_day());
    let mut pairs = Vec::new();
    for (i, &tb) in grid.values.iter().enumerate() {
        for &tu in &grid.values[i + 1..] {
            if let Ok(th) = MeanThresholds::new(tb, tu) {
                pairs.push(th);
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("threshold grid yields no valid pairs".into()));
    }
    let mut out = Vec::new();
    let mut start = first;
    loop {
        let end = add_months(start, interval_months);
        if end > last + chrono::Duration::days(1) {
            break; // trailing partial interval reuses earlier parameters
        }
        let interval_prices = prices.slice(start, end)?;
        let interval_preds: Vec<Prediction> = predictions
            .iter()
            .filter(|p| p.day >= start && p.day < end)
            .cloned()
            .collect();
        let mut best: Option<(MeanThresholds, f64)> = None;
        for th in &pairs {
            let opts = SignalOptions {
                method: AggregationMethod::Mean,
                thresholds: ThresholdSchedule::fixed(*th),
                normalize_window: 180,
            };
            let series = match build_signal_series(
                &interval_preds,
                (start, interval_prices.last_day()),
                &opts,
            ) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let cfg = StrategyConfig {
                kind: StrategyKind::InOutLong,
                barrier: None,
                base_fraction: 1.0,
                fee_rate: 0.0,
                confidence_sizing: false,
            };
            let (_, equity) = match run_in_out(&series, &interval_prices, &cfg) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let sharpe = match sharpe_ratio(&equity.daily_returns(), sharpe_params) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let better = match &best {
                None => true,
                Some((_, s)) => sharpe > *s,
            };
            if better {
                best = Some((*th, sharpe));
            }
        }
        let (thresholds, sharpe) = best.ok_or_else(|| Error::OptimizationFailed {
            start: start.to_string(),
            end: end.to_string(),
            reason: "no threshold pair produced a defined Sharpe ratio".into(),
        })?;
        out.push(ThresholdPeriod {
            start,
            end,
            thresholds,
            sharpe,
        });
        start = end;
    }
    if out.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no full {interval_months}-month interval between {first} and {last}"
        )));
    }
    Ok(out)
}

/// Reads the prediction JSONL contract:
/// `{"tweet_id","day","class","probs":[b,n,u]?,"fold"?}`.
pub fn read_predictions_jsonl(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path_str, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pred: Prediction = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            path: path_str.clone(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        pred.validate()?;
        out.push(pred);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} has no predictions")));
    }
    Ok(out)
}

/// Writes the prediction JSONL contract.
pub fn write_predictions_jsonl(preds: &[Prediction], path: impl AsRef<Path>) -> Result<usize> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to write".into()));
    }
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(&path_str, e))?;
    let mut w = std::io::BufWriter::new(file);
    for p in preds {
        let line = serde_json::to_string(p).map_err(|e| Error::Json {
            path: path_str.clone(),
            source: e,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(&path_str, e))?;
    }
    w.flush().map_err(|e| Error::io(&path_str, e))?;
    Ok(preds.len())
}

/// Writes the signal CSV contract:
/// `day,method,signal,confidence_raw,confidence,n_bearish,n_neutral,n_bullish,d_mean`.
pub fn write_signals_csv(series: &SignalSeries, path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: String| Error::io(&path_str, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(e.to_string()))?;
    w.write_record([
        "day",
        "method",
        "signal",
        "confidence_raw",
        "confidence",
        "n_bearish",
        "n_neutral",
        "n_bullish",
        "d_mean",
    ])
    .map_err(|e| io_err(e.to_string()))?;
    for d in series.days() {
        w.write_record([
            d.day.to_string(),
            series.method.to_string(),
            d.signal.to_string(),
            d.confidence_raw.to_string(),
            d.confidence.to_string(),
            d.counts[0].to_string(),
            d.counts[1].to_string(),
            d.counts[2].to_string(),
            d.mean_encoding.map(|x| x.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| io_err(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path_str, e))?;
    Ok(())
}

/// Reads the signal CSV contract back into a series.
pub fn read_signals_csv(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::io(&path_str, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())))?;
    let mut method = None;
    let mut days = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let malformed = |reason: String| Error::MalformedRow {
            path: path_str.clone(),
            line,
            reason,
        };
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        let get = |idx: usize| rec.get(idx).unwrap_or("");
        let day = NaiveDate::parse_from_str(get(0), "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad day: {e}")))?;
        let m = AggregationMethod::parse(get(1))
            .ok_or_else(|| malformed(format!("bad method {:?}", get(1))))?;
        match method {
            None => method = Some(m),
            Some(prev) if prev != m => {
                return Err(malformed("mixed aggregation methods in one file".into()))
            }
            _ => {}
        }
        let signal = TrendLabel::parse(get(2))
            .ok_or_else(|| malformed(format!("bad signal {:?}", get(2))))?;
        let parse_f64 =
            |s: &str, name: &str| -> Result<f64> { s.parse().map_err(|e| malformed(format!("bad {name}: {e}"))) };
        let parse_u64 =
            |s: &str, name: &str| -> Result<u64> { s.parse().map_err(|e| malformed(format!("bad {name}: {e}"))) };
        let confidence_raw = parse_f64(get(3), "confidence_raw")?;
        let confidence = parse_f64(get(4), "confidence")?;
        let counts = [
            parse_u64(get(5), "n_bearish")?,
            parse_u64(get(6), "n_neutral")?,
            parse_u64(get(7), "n_bullish")?,
        ];
        let mean_encoding = if get(8).is_empty() {
            None
        } else {
            Some(parse_f64(get(8), "d_mean")?)
        };
        days.push(DailyAggregate {
            day,
            counts,
            mean_encoding,
            signal,
            confidence_raw,
            confidence,
        });
    }
    let method = method.ok_or_else(|| Error::EmptyInput(format!("{path_str} has no signal rows")))?;
    for pair in days.windows(2) {
        if (pair[1].day - pair[0].day).num_days() != 1 {
            return Err(Error::CalendarMismatch(format!(
                "signal series is not a dense calendar around {}",
                pair[1].day
            )));
        }
    }
    Ok(SignalSeries { method, days })
}
