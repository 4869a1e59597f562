//! Strategy execution and performance reporting.
//!
//! All strategies act one day after the signal day: a signal aggregates a
//! full day of tweets, so the earliest honest fill is the next close. At
//! each day the engine first settles exits for the open position, then —
//! if flat — acts on yesterday's signal. A strategy holds at most one
//! position; signals arriving mid-position never modify it.
//!
//! Equity is marked trade-style: a position of fraction `s` entered at
//! price `P0` values the account at `E_entry * (1 + s * dir * (P_t/P0 - 1))`,
//! so the final equity is exactly the product of `1 + pnl` over closed
//! trades when fees are zero.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{compute_barriers, BarrierConfig, TrendLabel};
use crate::market_data::{PriceSeries, ReturnSeries, VolatilitySeries};
use crate::optimizer::{sharpe_ratio, SharpeParams};
use crate::signals::SignalSeries;

/// Strategy family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Tbl,
    InOutLong,
    InOutShort,
    BuyHold,
    SellHold,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s {
            "tbl" => Some(StrategyKind::Tbl),
            "in-out-long" => Some(StrategyKind::InOutLong),
            "in-out-short" => Some(StrategyKind::InOutShort),
            "buy-hold" => Some(StrategyKind::BuyHold),
            "sell-hold" => Some(StrategyKind::SellHold),
            _ => None,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StrategyKind::Tbl => "tbl",
            StrategyKind::InOutLong => "in-out-long",
            StrategyKind::InOutShort => "in-out-short",
            StrategyKind::BuyHold => "buy-hold",
            StrategyKind::SellHold => "sell-hold",
        };
        write!(f, "{s}")
    }
}

/// Strategy parameters. The barrier config is required for TBL only.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub barrier: Option<BarrierConfig>,
    /// Fraction of equity committed per trade before confidence scaling.
    pub base_fraction: f64,
    /// Proportional fee per side, deducted at trade close.
    pub fee_rate: f64,
    pub confidence_sizing: bool,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_fraction > 0.0 && self.base_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "base position fraction must lie in (0, 1], got {}",
                self.base_fraction
            )));
        }
        if self.fee_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "fee rate must be non-negative, got {}",
                self.fee_rate
            )));
        }
        if self.kind == StrategyKind::Tbl && self.barrier.is_none() {
            return Err(Error::InvalidConfig(
                "TBL strategy requires a barrier config".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    fn sign(&self) -> f64 {
        match self {
            Side::Long => 1.0,
            Side::Short => -1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Long => write!(f, "long"),
            Side::Short => write!(f, "short"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    TakeProfit,
    StopLoss,
    TimeLimit,
    OppositeSignal,
    EndOfData,
}

impl std::fmt::Display for ExitReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExitReason::TakeProfit => "take_profit",
            ExitReason::StopLoss => "stop_loss",
            ExitReason::TimeLimit => "time_limit",
            ExitReason::OppositeSignal => "opposite_signal",
            ExitReason::EndOfData => "end_of_data",
        };
        write!(f, "{s}")
    }
}

/// One closed trade. `pnl` is the equity fraction earned relative to the
/// equity at entry, net of fees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub side: Side,
    pub entry_day: NaiveDate,
    pub entry_price: f64,
    pub exit_day: NaiveDate,
    pub exit_price: f64,
    pub size: f64,
    pub reason: ExitReason,
    pub pnl: f64,
}

/// Closed trades plus any execution warnings (skipped entries).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeLog {
    pub trades: Vec<Trade>,
    pub warnings: Vec<String>,
}

/// Daily account value, starting at 1.0 on the first evaluation day.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    points: Vec<(NaiveDate, f64)>,
}

impl EquityCurve {
    pub fn from_points(points: Vec<(NaiveDate, f64)>) -> EquityCurve {
        EquityCurve { points }
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_equity(&self) -> f64 {
        self.points.last().map(|(_, e)| *e).unwrap_or(1.0)
    }

    /// Close-to-close simple returns of the account.
    pub fn daily_returns(&self) -> ReturnSeries {
        ReturnSeries::new(
            self.points
                .windows(2)
                .map(|w| (w[1].0, w[1].1 / w[0].1 - 1.0))
                .collect(),
        )
    }

    /// Writes the `day,equity` CSV contract.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path_str = path.as_ref().display().to_string();
        let io_err =
            |e: String| Error::io(&path_str, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(e.to_string()))?;
        w.write_record(["day", "equity"]).map_err(|e| io_err(e.to_string()))?;
        for (day, eq) in &self.points {
            w.write_record([day.to_string(), eq.to_string()])
                .map_err(|e| io_err(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&path_str, e))?;
        Ok(())
    }
}

struct OpenPosition {
    side: Side,
    entry_idx: usize,
    entry_price: f64,
    size: f64,
    entry_equity: f64,
    // TBL barrier levels; the lower barrier takes profit for shorts.
    upper: Option<f64>,
    lower: Option<f64>,
}

impl OpenPosition {
    fn pnl(&self, exit_price: f64, fee_rate: f64) -> f64 {
        self.size * self.side.sign() * (exit_price / self.entry_price - 1.0)
            - 2.0 * fee_rate * self.size
    }

    fn mark(&self, price: f64) -> f64 {
        self.entry_equity * (1.0 + self.size * self.side.sign() * (price / self.entry_price - 1.0))
    }
}

fn aligned_signal_offset(signals: &SignalSeries, prices: &PriceSeries) -> Result<i64> {
    let sig_start = signals
        .first_day()
        .ok_or_else(|| Error::EmptyInput("signal series is empty".into()))?;
    let sig_end = signals.last_day().unwrap();
    if sig_start < prices.first_day() || sig_end > prices.last_day() {
        return Err(Error::CalendarMismatch(format!(
            "signals {sig_start}..{sig_end} stick out of prices {}..{}",
            prices.first_day(),
            prices.last_day()
        )));
    }
    Ok((sig_start - prices.first_day()).num_days())
}

/// The aggregate for the price-calendar index `idx`, when the signal series
/// covers that day.
fn signal_at(
    signals: &SignalSeries,
    offset: i64,
    idx: usize,
) -> Option<&crate::signals::DailyAggregate> {
    let sig_idx = idx as i64 - offset;
    if sig_idx < 0 || sig_idx as usize >= signals.len() {
        None
    } else {
        Some(signals.get(sig_idx as usize))
    }
}

fn entry_size(
    config: &StrategyConfig,
    agg: &crate::signals::DailyAggregate,
) -> f64 {
    if config.confidence_sizing {
        config.base_fraction * agg.confidence
    } else {
        config.base_fraction
    }
}

/// In-Out strategy execution: enter on one signal class, exit on the
/// opposite. Long enters on Bullish and exits on Bearish; Short inverts.
pub fn run_in_out(
    signals: &SignalSeries,
    prices: &PriceSeries,
    config: &StrategyConfig,
) -> Result<(TradeLog, EquityCurve)> {
    config.validate()?;
    let (entry_label, exit_label, side) = match config.kind {
        StrategyKind::InOutLong => (TrendLabel::Bullish, TrendLabel::Bearish, Side::Long),
        StrategyKind::InOutShort => (TrendLabel::Bearish, TrendLabel::Bullish, Side::Short),
        other => {
            return Err(Error::InvalidConfig(format!(
                "run_in_out cannot execute a {other} strategy"
            )))
        }
    };
    let offset = aligned_signal_offset(signals, prices)?;
    let start_idx = offset as usize;
    let last_idx = prices.len() - 1;
    let mut log = TradeLog::default();
    let mut equity = Vec::with_capacity(prices.len() - start_idx);
    let mut flat_equity = 1.0;
    let mut position: Option<OpenPosition> = None;
    equity.push((prices.day_at(start_idx), 1.0));
    for d in (start_idx + 1)..=last_idx {
        let day = prices.day_at(d);
        let close = prices.close(d);
        let yesterday = signal_at(signals, offset, d - 1);
        // Settle the open position first.
        if let Some(pos) = &position {
            let exit_now = d == last_idx
                || yesterday.map(|a| a.signal == exit_label).unwrap_or(false);
            if exit_now {
                let reason = if yesterday.map(|a| a.signal == exit_label).unwrap_or(false) {
                    ExitReason::OppositeSignal
                } else {
                    ExitReason::EndOfData
                };
                let pnl = pos.pnl(close, config.fee_rate);
                let exit_equity = pos.entry_equity * (1.0 + pnl);
                log.trades.push(Trade {
                    side: pos.side,
                    entry_day: prices.day_at(pos.entry_idx),
                    entry_price: pos.entry_price,
                    exit_day: day,
                    exit_price: close,
                    size: pos.size,
                    reason,
                    pnl,
                });
                flat_equity = exit_equity;
                position = None;
            }
        }
        // Act on yesterday's signal if flat; entries on the last day are
        // pointless and skipped.
        if position.is_none() && d < last_idx {
            if let Some(agg) = yesterday {
                if agg.signal == entry_label {
                    let size = entry_size(config, agg);
                    if size > 0.0 {
                        position = Some(OpenPosition {
                            side,
                            entry_idx: d,
                            entry_price: close,
                            size,
                            entry_equity: flat_equity,
                            upper: None,
                            lower: None,
                        });
                    }
                }
            }
        }
        let value = match &position {
            Some(pos) => pos.mark(close),
            None => flat_equity,
        };
        equity.push((day, value));
    }
    Ok((log, EquityCurve { points: equity }))
}

/// TBL strategy execution: volatility-scaled take-profit and stop-loss
/// barriers fixed at entry, a `v_max`-day time limit, and the same minimum
/// trend duration and double-touch rules the labeler uses. The corridor is
/// always `upper = P(1 + sigma*f_upper)`, `lower = P(1 - sigma*f_lower)`;
/// for shorts the lower barrier takes profit and the upper stops out.
pub fn run_tbl(
    signals: &SignalSeries,
    prices: &PriceSeries,
    vols: &VolatilitySeries,
    config: &StrategyConfig,
) -> Result<(TradeLog, EquityCurve)> {
    config.validate()?;
    if config.kind != StrategyKind::Tbl {
        return Err(Error::InvalidConfig(format!(
            "run_tbl cannot execute a {} strategy",
            config.kind
        )));
    }
    let barrier = config.barrier.as_ref().unwrap();
    let offset = aligned_signal_offset(signals, prices)?;
    let start_idx = offset as usize;
    let last_idx = prices.len() - 1;
    let mut log = TradeLog::default();
    let mut equity = Vec::with_capacity(prices.len() - start_idx);
    let mut flat_equity = 1.0;
    let mut position: Option<OpenPosition> = None;
    equity.push((prices.day_at(start_idx), 1.0));
    for d in (start_idx + 1)..=last_idx {
        let day = prices.day_at(d);
        let candle = *prices.get(d);
        // Settle exits: barrier touch (intraday), then time limit (close),
        // then forced end-of-data.
        if let Some(pos) = &position {
            let upper = pos.upper.unwrap();
            let lower = pos.lower.unwrap();
            let held = d - pos.entry_idx;
            let mut exit: Option<(f64, ExitReason)> = None;
            if held >= barrier.min_trend_days && held <= barrier.v_max {
                let hit_upper = candle.high >= upper;
                let hit_lower = candle.low <= lower;
                let touched = match (hit_upper, hit_lower) {
                    (true, false) => Some(upper),
                    (false, true) => Some(lower),
                    (true, true) => {
                        if (candle.open - upper).abs() <= (candle.open - lower).abs() {
                            Some(upper)
                        } else {
                            Some(lower)
                        }
                    }
                    (false, false) => None,
                };
                if let Some(level) = touched {
                    let profit_level = match pos.side {
                        Side::Long => upper,
                        Side::Short => lower,
                    };
                    let reason = if level == profit_level {
                        ExitReason::TakeProfit
                    } else {
                        ExitReason::StopLoss
                    };
                    exit = Some((level, reason));
                }
            }
            if exit.is_none() && held >= barrier.v_max {
                exit = Some((candle.close, ExitReason::TimeLimit));
            }
            if exit.is_none() && d == last_idx {
                exit = Some((candle.close, ExitReason::EndOfData));
            }
            if let Some((price, reason)) = exit {
                let pnl = pos.pnl(price, config.fee_rate);
                let exit_equity = pos.entry_equity * (1.0 + pnl);
                log.trades.push(Trade {
                    side: pos.side,
                    entry_day: prices.day_at(pos.entry_idx),
                    entry_price: pos.entry_price,
                    exit_day: day,
                    exit_price: price,
                    size: pos.size,
                    reason,
                    pnl,
                });
                flat_equity = exit_equity;
                position = None;
            }
        }
        // Enter on yesterday's signal if flat.
        if position.is_none() && d < last_idx {
            if let Some(agg) = signal_at(signals, offset, d - 1) {
                let side = match agg.signal {
                    TrendLabel::Bullish => Some(Side::Long),
                    TrendLabel::Bearish => Some(Side::Short),
                    TrendLabel::Neutral => None,
                };
                if let Some(side) = side {
                    let size = entry_size(config, agg);
                    if size > 0.0 {
                        match vols.sigma_on(day) {
                            Some(sigma) => match compute_barriers(candle.close, sigma, barrier) {
                                Ok((upper, lower)) => {
                                    position = Some(OpenPosition {
                                        side,
                                        entry_idx: d,
                                        entry_price: candle.close,
                                        size,
                                        entry_equity: flat_equity,
                                        upper: Some(upper),
                                        lower: Some(lower),
                                    });
                                }
                                Err(e) => {
                                    log.warnings.push(format!("skipped entry on {day}: {e}"));
                                }
                            },
                            None => {
                                log.warnings
                                    .push(format!("skipped entry on {day}: no volatility estimate"));
                            }
                        }
                    }
                }
            }
        }
        let value = match &position {
            Some(pos) => pos.mark(candle.close),
            None => flat_equity,
        };
        equity.push((day, value));
    }
    Ok((log, EquityCurve { points: equity }))
}

/// Buy-and-hold / sell-and-hold benchmark: one full-size trade spanning the
/// whole price range.
pub fn run_hold(prices: &PriceSeries, side: Side) -> Result<(TradeLog, EquityCurve)> {
    if prices.len() < 2 {
        return Err(Error::InsufficientHistory(
            "hold benchmark needs at least two days".into(),
        ));
    }
    let entry_price = prices.close(0);
    let exit_idx = prices.len() - 1;
    let exit_price = prices.close(exit_idx);
    let pnl = side.sign() * (exit_price / entry_price - 1.0);
    let trades = vec![Trade {
        side,
        entry_day: prices.day_at(0),
        entry_price,
        exit_day: prices.day_at(exit_idx),
        exit_price,
        size: 1.0,
        reason: ExitReason::EndOfData,
        pnl,
    }];
    let points = prices
        .candles()
        .iter()
        .map(|c| {
            (
                c.day,
                1.0 + side.sign() * (c.close / entry_price - 1.0),
            )
        })
        .collect();
    Ok((
        TradeLog {
            trades,
            warnings: vec![],
        },
        EquityCurve { points },
    ))
}

/// The full metric set for one backtest run. Trade-dependent fields are
/// absent when no trades closed; `profit_factor_infinite` flags a log with
/// gross profits and zero gross losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub daily_return_pct: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub closed_trades: usize,
    pub max_drawdown_pct: f64,
    pub profit_factor: Option<f64>,
    pub profit_factor_infinite: bool,
    pub win_rate_pct: Option<f64>,
    pub avg_win_duration_days: Option<f64>,
    pub avg_loss_duration_days: Option<f64>,
}

/// Computes the report from a trade log and its equity curve.
pub fn performance(
    trades: &TradeLog,
    equity: &EquityCurve,
    params: &SharpeParams,
) -> Result<PerformanceReport> {
    if equity.len() < 2 {
        return Err(Error::InsufficientHistory(
            "performance needs an equity curve of length >= 2".into(),
        ));
    }
    let returns = equity.daily_returns();
    let n = returns.len() as f64;
    let mean = returns.values().sum::<f64>() / n;
    let daily_return_pct = mean * 100.0;
    let sharpe = sharpe_ratio(&returns, params).ok();

    // Sortino: downside deviation is the RMS of negative excess returns
    // over the full sample length, target = daily risk-free.
    let rf_daily = params.risk_free_annual / 365.0;
    let mean_excess = mean - rf_daily;
    let downside_sq: f64 = returns
        .values()
        .map(|r| {
            let excess = r - rf_daily;
            if excess < 0.0 {
                excess * excess
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n;
    let downside = downside_sq.sqrt();
    let sortino = if downside > 0.0 {
        Some(mean_excess / downside * (params.days_per_year as f64).sqrt())
    } else {
        None
    };

    let mut peak = f64::NEG_INFINITY;
    let mut max_dd = 0.0f64;
    for (_, e) in equity.points() {
        peak = peak.max(*e);
        if peak > 0.0 {
            max_dd = max_dd.max((peak - e) / peak);
        }
    }

    let closed = trades.trades.len();
    let gross_profit: f64 = trades.trades.iter().filter(|t| t.pnl > 0.0).map(|t| t.pnl).sum();
    let gross_loss: f64 = trades
        .trades
        .iter()
        .filter(|t| t.pnl < 0.0)
        .map(|t| -t.pnl)
        .sum();
    let (profit_factor, profit_factor_infinite) = if closed == 0 {
        (None, false)
    } else if gross_loss == 0.0 {
        (None, gross_profit > 0.0)
    } else {
        (Some(gross_profit / gross_loss), false)
    };
    let winners: Vec<&Trade> = trades.trades.iter().filter(|t| t.pnl > 0.0).collect();
    let losers: Vec<&Trade> = trades.trades.iter().filter(|t| t.pnl < 0.0).collect();
    let win_rate_pct = if closed > 0 {
        Some(winners.len() as f64 / closed as f64 * 100.0)
    } else {
        None
    };
    let avg_duration = |set: &[&Trade]| {
        if set.is_empty() {
            None
        } else {
            Some(
                set.iter()
                    .map(|t| (t.exit_day - t.entry_day).num_days() as f64)
                    .sum::<f64>()
                    / set.len() as f64,
            )
        }
    };
    Ok(PerformanceReport {
        daily_return_pct,
        sharpe,
        sortino,
        closed_trades: closed,
        max_drawdown_pct: max_dd * 100.0,
        profit_factor,
        profit_factor_infinite,
        win_rate_pct,
        avg_win_duration_days: avg_duration(&winners),
        avg_loss_duration_days: avg_duration(&losers),
    })
}

/// Writes the trade log CSV contract:
/// `side,entry_day,entry_price,exit_day,exit_price,size,reason,pnl`.
pub fn write_trades_csv(log: &TradeLog, path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: String| Error::io(&path_str, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(e.to_string()))?;
    w.write_record([
        "side",
        "entry_day",
        "entry_price",
        "exit_day",
        "exit_price",
        "size",
        "reason",
        "pnl",
    ])
    .map_err(|e| io_err(e.to_string()))?;
    for t in &log.trades {
        w.write_record([
            t.side.to_string(),
            t.entry_day.to_string(),
            t.entry_price.to_string(),
            t.exit_day.to_string(),
            t.exit_price.to_string(),
            t.size.to_string(),
            t.reason.to_string(),
            t.pnl.to_string(),
        ])
        .map_err(|e| io_err(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path_str, e))?;
    Ok(())
}
