//! Stage implementations shared by the standalone subcommands and the
//! `pipeline` command. Stages hand data to each other exclusively through
//! files, so an external model can be slotted between `prompts` and
//! `aggregate`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use trendlab::backtest::{
    performance, run_hold, run_in_out, run_tbl, write_trades_csv, EquityCurve, PerformanceReport,
    Side, StrategyConfig, StrategyKind, TradeLog,
};
use trendlab::error::{Error, Result};
use trendlab::evaluation::{confusion, cross_entropy, ovo_metrics, ovr_metrics, ClassMetrics};
use trendlab::labeling::{
    daily_labels, label_series, write_daily_csv, write_windows_csv, BarrierConfig, LabelSeries,
    TrendLabel,
};
use trendlab::market_data::{
    ewma_volatility, log_returns, roc, roc_thresholds, rsi, EwmaParams, GapPolicy,
    IndicatorThresholds, PriceSeries, ReturnSeries, VolatilitySeries, ROC_PERIOD,
};
use trendlab::optimizer::{
    optimize_barriers, write_journal_csv, OptimizationGrid, PeriodParams, SharpeParams,
};
use trendlab::signals::{
    build_signal_series, fold_ensemble, optimize_mean_thresholds, write_signals_csv,
    AggregationMethod, MeanThresholds, Prediction, SignalOptions, SignalSeries, ThresholdGrid,
    ThresholdSchedule,
};
use trendlab::text_pipeline::{
    build_context, export_dataset, preprocess_tweet, read_tweets_jsonl, render_prompt,
    FilterRuleset, PromptMode, PromptRecord,
};

/// Prices plus the derived series every stage needs.
pub struct MarketBundle {
    pub prices: PriceSeries,
    pub returns: ReturnSeries,
    pub vols: VolatilitySeries,
}

pub fn load_market(path: &Path, policy: GapPolicy, tau: usize) -> Result<MarketBundle> {
    let prices = PriceSeries::load_ohlcv(path, policy)?;
    let returns = log_returns(&prices)?;
    let vols = ewma_volatility(&returns, &EwmaParams::new(tau)?)?;
    Ok(MarketBundle {
        prices,
        returns,
        vols,
    })
}

pub fn stage_label(
    bundle: &MarketBundle,
    config: &BarrierConfig,
    out_windows: &Path,
    out_daily: &Path,
) -> Result<(LabelSeries, BTreeMap<NaiveDate, TrendLabel>)> {
    let labeled = label_series(&bundle.prices, &bundle.vols, config)?;
    let daily = daily_labels(&labeled);
    write_windows_csv(&labeled, out_windows)?;
    write_daily_csv(&daily, out_daily)?;
    Ok((labeled, daily))
}

pub fn stage_optimize(
    bundle: &MarketBundle,
    grid: &OptimizationGrid,
    interval_months: u32,
    sharpe: &SharpeParams,
    out: &Path,
) -> Result<Vec<PeriodParams>> {
    let periods = optimize_barriers(&bundle.prices, &bundle.vols, grid, interval_months, sharpe)?;
    write_journal_csv(&periods, out)?;
    Ok(periods)
}

/// Counters reported by the prompts stage.
#[derive(Debug, Default)]
pub struct PromptStats {
    pub written: usize,
    pub dropped: usize,
    pub no_context: usize,
    pub unlabeled: usize,
}

/// Renders prompts for every usable tweet.
///
/// ROC thresholds are recomputed per day from the trailing `roc_window`
/// observations ending the day before, so no prompt encodes same-day or
/// future information. Tweets that are dropped by the filter, fall outside
/// the labeled range, or lack context are skipped and counted.
pub fn stage_prompts(
    bundle: &MarketBundle,
    labeled: &LabelSeries,
    daily: &BTreeMap<NaiveDate, TrendLabel>,
    tweets_path: &Path,
    mode: PromptMode,
    rsi_period: usize,
    roc_k: f64,
    roc_window: usize,
    out: &Path,
) -> Result<PromptStats> {
    let tweets = read_tweets_jsonl(tweets_path)?;
    let rules = FilterRuleset::default();
    let roc_series = roc(&bundle.prices, ROC_PERIOD)?;
    let rsi_series = rsi(&bundle.prices, rsi_period)?;
    let rsi_th = IndicatorThresholds::rsi_default();
    let mut roc_th_cache: BTreeMap<NaiveDate, Option<IndicatorThresholds>> = BTreeMap::new();
    let mut records: Vec<PromptRecord> = Vec::new();
    let mut stats = PromptStats::default();
    for raw in &tweets {
        let clean = preprocess_tweet(raw, &rules)?;
        if clean.dropped {
            stats.dropped += 1;
            continue;
        }
        let Some(label) = daily.get(&clean.day).copied() else {
            stats.unlabeled += 1;
            continue;
        };
        let record = match mode {
            PromptMode::Cua => render_prompt(None, &clean, mode, label)?,
            PromptMode::Ca | PromptMode::Tca => {
                let roc_th = *roc_th_cache
                    .entry(clean.day)
                    .or_insert_with(|| trailing_roc_thresholds(&bundle.returns, clean.day, roc_window, roc_k));
                let Some(roc_th) = roc_th else {
                    stats.no_context += 1;
                    continue;
                };
                match build_context(clean.day, labeled, &roc_series, &rsi_series, &roc_th, &rsi_th)
                {
                    Ok(ctx) => render_prompt(Some(&ctx), &clean, mode, label)?,
                    Err(Error::NoContext { .. }) => {
                        stats.no_context += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        records.push(record);
    }
    stats.written = export_dataset(&records, out)?;
    Ok(stats)
}

/// ROC thresholds from the trailing window of 8-day compounded returns
/// ending strictly before `day`. `None` when history is too short or the
/// window is degenerate.
fn trailing_roc_thresholds(
    returns: &ReturnSeries,
    day: NaiveDate,
    window: usize,
    k: f64,
) -> Option<IndicatorThresholds> {
    let pts: Vec<(NaiveDate, f64)> = returns
        .points()
        .iter()
        .filter(|(d, _)| *d < day)
        .cloned()
        .collect();
    let available = pts.len().saturating_sub(ROC_PERIOD - 1);
    let w = window.min(available);
    if w < 2 {
        return None;
    }
    roc_thresholds(&ReturnSeries::new(pts), w, k).ok()
}

pub struct AggregateSpec {
    pub method: AggregationMethod,
    pub static_thresholds: MeanThresholds,
    /// Fit thresholds walk-forward instead of using the static pair.
    pub optimize: bool,
    pub interval_months: u32,
    pub normalize_window: usize,
    pub sharpe: SharpeParams,
}

pub fn stage_aggregate(
    predictions: &[Prediction],
    range: (NaiveDate, NaiveDate),
    spec: &AggregateSpec,
    prices_for_optimization: Option<&PriceSeries>,
    out: &Path,
) -> Result<SignalSeries> {
    for p in predictions {
        if p.day < range.0 || p.day > range.1 {
            return Err(Error::CalendarMismatch(format!(
                "prediction for {} lies outside the signal calendar {}..{}",
                p.day, range.0, range.1
            )));
        }
    }
    let thresholds = if spec.method == AggregationMethod::Mean && spec.optimize {
        let prices = prices_for_optimization.ok_or_else(|| {
            Error::InvalidConfig("threshold optimization needs price history".into())
        })?;
        let fitted = optimize_mean_thresholds(
            predictions,
            prices,
            &ThresholdGrid::default(),
            spec.interval_months,
            &spec.sharpe,
        )?;
        ThresholdSchedule::walk_forward(&fitted, spec.static_thresholds)
    } else {
        ThresholdSchedule::fixed(spec.static_thresholds)
    };
    let series = build_signal_series(
        predictions,
        range,
        &SignalOptions {
            method: spec.method,
            thresholds,
            normalize_window: spec.normalize_window,
        },
    )?;
    write_signals_csv(&series, out)?;
    Ok(series)
}

/// Collapses folds, joins predictions to daily labels by day, and emits
/// the OVR and OVO metric blocks. Cross-entropy attaches to the OVR block
/// when every prediction carries probabilities.
pub fn stage_evaluate(
    predictions: &[Prediction],
    daily: &BTreeMap<NaiveDate, TrendLabel>,
    out: &Path,
) -> Result<Vec<ClassMetrics>> {
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
    let mut truths = Vec::with_capacity(collapsed.len());
    for p in &collapsed {
        let truth = daily.get(&p.day).copied().ok_or_else(|| {
            Error::CalendarMismatch(format!(
                "prediction {} on {} has no matching daily label",
                p.tweet_id, p.day
            ))
        })?;
        truths.push(truth);
    }
    let predicted: Vec<TrendLabel> = collapsed.iter().map(|p| p.predicted).collect();
    let cm = confusion(&truths, &predicted)?;
    let mut ovr = ovr_metrics(&cm);
    if collapsed.iter().all(|p| p.probs.is_some()) {
        ovr.cross_entropy = Some(cross_entropy(&collapsed, &truths)?);
    }
    let mut blocks = vec![ovr];
    match ovo_metrics(&truths, &predicted, TrendLabel::Bullish) {
        Ok(block) => blocks.push(block),
        Err(Error::EmptyInput(_)) => {
            eprintln!("warning: no Bullish/Bearish samples; OVO metrics skipped")
        }
        Err(e) => return Err(e),
    }
    if let Ok(block) = ovo_metrics(&truths, &predicted, TrendLabel::Bearish) {
        blocks.push(block);
    }
    trendlab::evaluation::write_metrics_json(&blocks, out)?;
    Ok(blocks)
}

pub struct BacktestSpec {
    pub strategy: StrategyConfig,
    pub sharpe: SharpeParams,
}

pub fn stage_backtest(
    signals: &SignalSeries,
    bundle: &MarketBundle,
    spec: &BacktestSpec,
    out_trades: &Path,
    out_equity: &Path,
    out_report: &Path,
) -> Result<PerformanceReport> {
    let (log, equity): (TradeLog, EquityCurve) = match spec.strategy.kind {
        StrategyKind::Tbl => run_tbl(signals, &bundle.prices, &bundle.vols, &spec.strategy)?,
        StrategyKind::InOutLong | StrategyKind::InOutShort => {
            run_in_out(signals, &bundle.prices, &spec.strategy)?
        }
        StrategyKind::BuyHold | StrategyKind::SellHold => {
            // Benchmarks cover the same evaluation range as the signal-driven
            // strategies.
            let start = signals
                .first_day()
                .ok_or_else(|| Error::EmptyInput("signal series is empty".into()))?;
            let sliced = bundle.prices.slice(
                start,
                bundle.prices.last_day() + chrono::Duration::days(1),
            )?;
            let side = if spec.strategy.kind == StrategyKind::BuyHold {
                Side::Long
            } else {
                Side::Short
            };
            run_hold(&sliced, side)?
        }
    };
    for warning in &log.warnings {
        eprintln!("warning: {warning}");
    }
    let report = performance(&log, &equity, &spec.sharpe)?;
    write_trades_csv(&log, out_trades)?;
    equity.write_csv(out_equity)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
        path: out_report.display().to_string(),
        source: e,
    })?;
    std::fs::write(out_report, json + "\n")
        .map_err(|e| Error::Io { path: out_report.display().to_string(), source: e })?;
    Ok(report)
}
