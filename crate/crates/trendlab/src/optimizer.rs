//! Walk-forward grid search of barrier parameters.
//!
//! Each six-month interval is labeled under every grid point and scored by
//! the Sharpe ratio of the label-following strategy (long Bullish windows,
//! short Bearish windows, flat otherwise, no fees). The argmax per interval
//! is reported; consumers apply interval k's winner to interval k+1 so no
//! decision ever sees its own data.

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::labeling::{label_series, BarrierConfig, LabelSeries, TrendLabel};
use crate::market_data::{add_months, PriceSeries, ReturnSeries, VolatilitySeries};

/// Candidate barrier parameters. The cross-product is evaluated in
/// lexicographic `(f_upper, f_lower, v_max)` order, which also fixes the
/// tie-breaking rule.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationGrid {
    pub f_upper: Vec<f64>,
    pub f_lower: Vec<f64>,
    pub v_max: Vec<usize>,
    pub min_trend_days: usize,
}

impl OptimizationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.f_upper.is_empty() || self.f_lower.is_empty() || self.v_max.is_empty() {
            return Err(Error::InvalidConfig(
                "optimization grid axes must be non-empty".into(),
            ));
        }
        for &v in &self.v_max {
            if !(8..=15).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "vertical barrier candidate {v} outside [8, 15]"
                )));
            }
        }
        Ok(())
    }

    /// Grid points in lexicographic order.
    pub fn configs(&self) -> Result<Vec<BarrierConfig>> {
        self.validate()?;
        let mut fu = self.f_upper.clone();
        let mut fl = self.f_lower.clone();
        let mut v = self.v_max.clone();
        fu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fl.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.sort_unstable();
        let mut out = Vec::with_capacity(fu.len() * fl.len() * v.len());
        for &a in &fu {
            for &b in &fl {
                for &c in &v {
                    out.push(BarrierConfig::new(a, b, c, self.min_trend_days)?);
                }
            }
        }
        Ok(out)
    }
}

impl Default for OptimizationGrid {
    /// Factors 0.5 to 3.0 in steps of 0.25, all vertical barriers 8..15.
    fn default() -> Self {
        OptimizationGrid {
            f_upper: (0..=10).map(|i| 0.5 + 0.25 * i as f64).collect(),
            f_lower: (0..=10).map(|i| 0.5 + 0.25 * i as f64).collect(),
            v_max: (8..=15).collect(),
            min_trend_days: 2,
        }
    }
}

/// Sharpe ratio parameters: 4% annual risk-free, 365-day year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeParams {
    pub risk_free_annual: f64,
    pub days_per_year: u32,
}

impl Default for SharpeParams {
    fn default() -> Self {
        SharpeParams {
            risk_free_annual: 0.04,
            days_per_year: 365,
        }
    }
}

/// Winning parameters for one fitted interval (half-open `[start, end)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodParams {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub config: BarrierConfig,
    pub sharpe: f64,
}

/// Daily returns of the label-following strategy: long through Bullish
/// windows, short through Bearish ones, flat through Neutral. The return
/// on day t is the signed close-to-close simple return, attributed to the
/// window that owns day t-1.
pub fn label_strategy_returns(windows: &LabelSeries, prices: &PriceSeries) -> ReturnSeries {
    let mut points = Vec::new();
    for w in windows.windows() {
        let sign = match w.label {
            TrendLabel::Bullish => 1.0,
            TrendLabel::Bearish => -1.0,
            TrendLabel::Neutral => 0.0,
        };
        let s = prices.index_of(w.start_day).expect("window inside prices");
        let e = prices.index_of(w.end_day).expect("window inside prices");
        for t in (s + 1)..=e {
            let r = prices.close(t) / prices.close(t - 1) - 1.0;
            points.push((prices.day_at(t), sign * r));
        }
    }
    ReturnSeries::new(points)
}

/// Annualized Sharpe ratio of a daily return series.
///
/// Daily excess over the sample (n-1) standard deviation, scaled by
/// `sqrt(days_per_year)`; the daily risk-free rate is `annual / 365`
/// regardless of the annualization constant. A zero-variance series is
/// undefined unless its excess mean is exactly zero, which scores 0.
pub fn sharpe_ratio(returns: &ReturnSeries, params: &SharpeParams) -> Result<f64> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::UndefinedSharpe(format!(
            "need at least 2 returns, got {n}"
        )));
    }
    let nf = n as f64;
    let rf_daily = params.risk_free_annual / 365.0;
    // Work on the excess series directly: its standard deviation equals the
    // return standard deviation. Constant series are detected structurally
    // so accumulated rounding cannot fake a nonzero variance.
    let excess: Vec<f64> = returns.values().map(|r| r - rf_daily).collect();
    if excess.iter().all(|e| *e == excess[0]) {
        return if excess[0] == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedSharpe(
                "zero-variance returns with nonzero excess".into(),
            ))
        };
    }
    let mean = excess.iter().sum::<f64>() / nf;
    let var = excess.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (nf - 1.0);
    let std = var.sqrt();
    Ok(mean / std * (params.days_per_year as f64).sqrt())
}

/// Scores one grid point on one interval; errors (degenerate barriers,
/// undefined Sharpe) disqualify the point.
fn score_config(
    interval: &PriceSeries,
    vols: &VolatilitySeries,
    config: &BarrierConfig,
    sharpe_params: &SharpeParams,
) -> Option<f64> {
    let labeled = label_series(interval, vols, config).ok()?;
    let returns = label_strategy_returns(&labeled, interval);
    sharpe_ratio(&returns, sharpe_params).ok()
}

/// Exhaustive grid search per six-month interval.
///
/// Intervals are calendar-month blocks anchored at the first post-warmup
/// day; only full intervals are fitted (a trailing partial interval is
/// expected to reuse the last fitted parameters). Grid evaluations run in
/// parallel but reduce in fixed lexicographic order, so ties always break
/// toward the smallest `(f_upper, f_lower, v_max)`.
pub fn optimize_barriers(
    prices: &PriceSeries,
    vols: &VolatilitySeries,
    grid: &OptimizationGrid,
    interval_months: u32,
    sharpe_params: &SharpeParams,
) -> Result<Vec<PeriodParams>> {
    if interval_months == 0 {
        return Err(Error::InvalidConfig("interval length must be >= 1 month".into()));
    }
    let configs = grid.configs()?;
    let first_vol = vols
        .first_day()
        .ok_or_else(|| Error::InsufficientHistory("volatility series is empty".into()))?;
    let anchor = first_vol.max(prices.first_day());
    if anchor > prices.last_day() {
        return Err(Error::InsufficientHistory(
            "no post-warmup data to optimize over".into(),
        ));
    }
    let mut out = Vec::new();
    let mut start = anchor;
    loop {
        let end = add_months(start, interval_months);
        if end > prices.last_day() + chrono::Duration::days(1) {
            break;
        }
        let interval = prices.slice(start, end)?;
        let scores: Vec<Option<f64>> = configs
            .par_iter()
            .map(|cfg| score_config(&interval, vols, cfg, sharpe_params))
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, score) in scores.iter().enumerate() {
            if let Some(s) = score {
                let better = match best {
                    None => true,
                    Some((_, b)) => *s > b,
                };
                if better {
                    best = Some((i, *s));
                }
            }
        }
        let (idx, sharpe) = best.ok_or_else(|| Error::OptimizationFailed {
            start: start.to_string(),
            end: end.to_string(),
            reason: "every grid point was degenerate on this interval".into(),
        })?;
        out.push(PeriodParams {
            start,
            end,
            config: configs[idx],
            sharpe,
        });
        start = end;
    }
    if out.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no full {interval_months}-month interval in {}..{}",
            anchor,
            prices.last_day()
        )));
    }
    Ok(out)
}

/// Writes the parameter journal CSV contract:
/// `interval_start,interval_end,f_upper,f_lower,v_max,sharpe`
/// (`interval_end` is the exclusive bound).
pub fn write_journal_csv(periods: &[PeriodParams], path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: String| Error::io(&path_str, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(e.to_string()))?;
    w.write_record([
        "interval_start",
        "interval_end",
        "f_upper",
        "f_lower",
        "v_max",
        "sharpe",
    ])
    .map_err(|e| io_err(e.to_string()))?;
    for p in periods {
        w.write_record([
            p.start.to_string(),
            p.end.to_string(),
            p.config.f_upper.to_string(),
            p.config.f_lower.to_string(),
            p.config.v_max.to_string(),
            p.sharpe.to_string(),
        ])
        .map_err(|e| io_err(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path_str, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::daily_labels;
    use crate::market_data::{date, ewma_volatility, log_returns, Candle, EwmaParams};
    use crate::synthetic::{gen_gbm, GbmParams};

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

    fn flat_vols(prices: &PriceSeries, sigma: f64) -> VolatilitySeries {
        let pseudo = ReturnSeries::new(prices.candles().iter().map(|c| (c.day, sigma)).collect());
        ewma_volatility(&pseudo, &EwmaParams::new(1).unwrap()).unwrap()
    }

    fn returns_of(values: &[f64]) -> ReturnSeries {
        ReturnSeries::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (date(2020, 1, 2) + chrono::Duration::days(i as i64), v))
                .collect(),
        )
    }

    #[test]
    fn all_neutral_labeling_earns_nothing() {
        let prices = series_from_closes(&[100.0; 12]);
        let vols = flat_vols(&prices, 0.05);
        let labeled = label_series(&prices, &vols, &BarrierConfig::default()).unwrap();
        assert!(labeled.windows().iter().all(|w| w.label == TrendLabel::Neutral));
        let r = label_strategy_returns(&labeled, &prices);
        assert!(r.values().all(|v| v == 0.0));
    }

    #[test]
    fn bullish_window_passes_market_return_through() {
        // One Bullish window over 100 -> 110: cumulative +10%.
        let closes = [100.0, 104.0, 111.0, 110.0, 110.0, 110.0, 110.0, 110.0, 110.0, 110.0];
        let prices = series_from_closes(&closes);
        let vols = flat_vols(&prices, 0.05);
        let labeled = label_series(&prices, &vols, &BarrierConfig::default()).unwrap();
        let w = &labeled.windows()[0];
        assert_eq!(w.label, TrendLabel::Bullish);
        assert_eq!(w.end_day, date(2020, 1, 3));
        let r = label_strategy_returns(&labeled, &prices);
        let cum: f64 = r
            .points()
            .iter()
            .take_while(|(d, _)| *d <= w.end_day)
            .map(|(_, v)| 1.0 + v)
            .product();
        assert!((cum - 1.11).abs() < 1e-12);
    }

    #[test]
    fn bearish_window_compounds_negated_returns() {
        // Bearish window over 100 -> 95 -> 90: day-by-day negation.
        let mut closes = vec![100.0, 95.0, 90.0];
        closes.extend(vec![90.0; 7]);
        let prices = series_from_closes(&closes);
        let vols = flat_vols(&prices, 0.05);
        let labeled = label_series(&prices, &vols, &BarrierConfig::default()).unwrap();
        let w = &labeled.windows()[0];
        assert_eq!(w.label, TrendLabel::Bearish);
        assert_eq!(w.end_day, date(2020, 1, 3));
        let r = label_strategy_returns(&labeled, &prices);
        let cum: f64 = r
            .points()
            .iter()
            .take_while(|(d, _)| *d <= w.end_day)
            .map(|(_, v)| 1.0 + v)
            .product();
        // (1 + 0.05) * (1 + 5/95)
        assert!((cum - 1.05 * (1.0 + 5.0 / 95.0)).abs() < 1e-12);
    }

    #[test]
    fn sharpe_hand_example() {
        let params = SharpeParams {
            risk_free_annual: 0.0,
            days_per_year: 365,
        };
        let s = sharpe_ratio(&returns_of(&[0.01, 0.02, 0.03]), &params).unwrap();
        assert!((s - 38.2099463490856).abs() < 1e-9);
    }

    #[test]
    fn sharpe_zero_excess_at_risk_free() {
        let params = SharpeParams::default();
        let rf_daily = 0.04 / 365.0;
        let s = sharpe_ratio(&returns_of(&[rf_daily; 5]), &params).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sharpe_constant_returns_undefined() {
        let params = SharpeParams::default();
        assert!(matches!(
            sharpe_ratio(&returns_of(&[0.01; 5]), &params),
            Err(Error::UndefinedSharpe(_))
        ));
    }

    #[test]
    fn sharpe_annualization_covariance() {
        let r = returns_of(&[0.01, -0.02, 0.03, 0.005]);
        let base = sharpe_ratio(
            &r,
            &SharpeParams {
                risk_free_annual: 0.0,
                days_per_year: 365,
            },
        )
        .unwrap();
        let doubled = sharpe_ratio(
            &r,
            &SharpeParams {
                risk_free_annual: 0.0,
                days_per_year: 730,
            },
        )
        .unwrap();
        assert!((doubled - base * 2.0f64.sqrt()).abs() < 1e-12);
    }

    fn gbm_with_vols(seed: u64, days: usize, drift: f64) -> (PriceSeries, VolatilitySeries) {
        let prices = gen_gbm(&GbmParams {
            seed,
            drift,
            volatility: 0.5,
            days,
            ..GbmParams::default()
        })
        .unwrap();
        let vols = ewma_volatility(&log_returns(&prices).unwrap(), &EwmaParams::default()).unwrap();
        (prices, vols)
    }

    #[test]
    fn singleton_grid_returns_that_config() {
        let (prices, vols) = gbm_with_vols(5, 250, 0.0);
        let grid = OptimizationGrid {
            f_upper: vec![1.0],
            f_lower: vec![1.0],
            v_max: vec![8],
            min_trend_days: 2,
        };
        let periods =
            optimize_barriers(&prices, &vols, &grid, 6, &SharpeParams::default()).unwrap();
        assert_eq!(periods.len(), 1);
        assert_eq!(periods[0].config, BarrierConfig::default());
        // The reported Sharpe is the config's own score.
        let interval = prices.slice(periods[0].start, periods[0].end).unwrap();
        let labeled = label_series(&interval, &vols, &periods[0].config).unwrap();
        let expect =
            sharpe_ratio(&label_strategy_returns(&labeled, &interval), &SharpeParams::default())
                .unwrap();
        assert_eq!(periods[0].sharpe, expect);
    }

    #[test]
    fn uptrend_prefers_bullish_labelings() {
        let (prices, vols) = gbm_with_vols(9, 260, 2.5);
        let grid = OptimizationGrid {
            f_upper: vec![0.5, 1.0, 2.0],
            f_lower: vec![0.5, 1.0, 2.0],
            v_max: vec![8, 12],
            min_trend_days: 2,
        };
        let periods =
            optimize_barriers(&prices, &vols, &grid, 6, &SharpeParams::default()).unwrap();
        let p = &periods[0];
        let interval = prices.slice(p.start, p.end).unwrap();
        let labeled = label_series(&interval, &vols, &p.config).unwrap();
        let daily = daily_labels(&labeled);
        let bullish = daily.values().filter(|l| **l == TrendLabel::Bullish).count();
        assert!(
            bullish as f64 / daily.len() as f64 > 0.5,
            "bullish fraction {} of {}",
            bullish,
            daily.len()
        );
    }

    #[test]
    fn argmax_matches_independent_rescan() {
        let (prices, vols) = gbm_with_vols(12, 250, 0.0);
        let grid = OptimizationGrid {
            f_upper: vec![0.75, 1.0, 1.5],
            f_lower: vec![0.75, 1.0, 1.5],
            v_max: vec![8, 12],
            min_trend_days: 2,
        };
        let periods =
            optimize_barriers(&prices, &vols, &grid, 6, &SharpeParams::default()).unwrap();
        let p = &periods[0];
        let interval = prices.slice(p.start, p.end).unwrap();
        let mut best: Option<(BarrierConfig, f64)> = None;
        let mut evaluated = 0;
        for cfg in grid.configs().unwrap() {
            if let Ok(labeled) = label_series(&interval, &vols, &cfg) {
                if let Ok(s) = sharpe_ratio(
                    &label_strategy_returns(&labeled, &interval),
                    &SharpeParams::default(),
                ) {
                    evaluated += 1;
                    let better = best.as_ref().map(|(_, b)| s > *b).unwrap_or(true);
                    if better {
                        best = Some((cfg, s));
                    }
                }
            }
        }
        assert_eq!(evaluated, 18);
        let (cfg, s) = best.unwrap();
        assert_eq!(p.config, cfg);
        assert_eq!(p.sharpe, s);
    }

    #[test]
    fn all_degenerate_interval_names_the_interval() {
        // Zero volatility everywhere makes every grid point degenerate.
        let prices = series_from_closes(&vec![100.0; 200]);
        let vols = flat_vols(&prices, 0.0);
        let grid = OptimizationGrid {
            f_upper: vec![1.0],
            f_lower: vec![1.0],
            v_max: vec![8],
            min_trend_days: 2,
        };
        match optimize_barriers(&prices, &vols, &grid, 6, &SharpeParams::default()) {
            Err(Error::OptimizationFailed { start, .. }) => {
                assert_eq!(start, "2020-01-01");
            }
            other => panic!("expected optimization failure, got {other:?}"),
        }
    }

    #[test]
    fn walk_forward_hygiene_under_future_mutation() {
        let (prices, vols) = gbm_with_vols(21, 480, 0.0);
        let grid = OptimizationGrid {
            f_upper: vec![0.75, 1.25],
            f_lower: vec![0.75, 1.25],
            v_max: vec![8],
            min_trend_days: 2,
        };
        let base = optimize_barriers(&prices, &vols, &grid, 6, &SharpeParams::default()).unwrap();
        assert!(base.len() >= 2);
        // Scale every candle from the second interval onward and re-derive
        // volatility from the mutated path.
        let boundary = base[0].end;
        let mutated: Vec<Candle> = prices
            .candles()
            .iter()
            .map(|c| {
                if c.day >= boundary {
                    Candle {
                        day: c.day,
                        open: c.open * 1.3,
                        high: c.high * 1.3,
                        low: c.low * 1.3,
                        close: c.close * 1.3,
                        volume: c.volume,
                    }
                } else {
                    *c
                }
            })
            .collect();
        let mutated_prices = PriceSeries::new(mutated).unwrap();
        let mutated_vols =
            ewma_volatility(&log_returns(&mutated_prices).unwrap(), &EwmaParams::default()).unwrap();
        let shifted =
            optimize_barriers(&mutated_prices, &mutated_vols, &grid, 6, &SharpeParams::default())
                .unwrap();
        // Interval 0 was fitted purely on pre-boundary data: identical.
        assert_eq!(base[0].config, shifted[0].config);
        assert_eq!(base[0].sharpe, shifted[0].sharpe);
    }
}
