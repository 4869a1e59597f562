//! Deterministic synthetic data: GBM price paths and accuracy-controllable
//! classifiers, so the whole pipeline can be exercised without proprietary
//! tweet corpora.
//!
//! All generation is seeded ChaCha8 and therefore reproducible across runs
//! and platforms. Per-day classifier draws derive independent sub-seeds by
//! a golden-ratio mix of the base seed and the day index, so generation can
//! be parallelized per day without changing output.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::labeling::TrendLabel;
use crate::market_data::{date, Candle, PriceSeries};
use crate::signals::Prediction;

/// RNG algorithm identifier recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Geometric Brownian motion parameters. Drift and volatility are
/// annualized; daily values are `drift / 365` and `volatility / sqrt(365)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub seed: u64,
    pub drift: f64,
    pub volatility: f64,
    pub days: usize,
    pub start_price: f64,
    pub start_day: NaiveDate,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            seed: 0,
            drift: 0.0,
            volatility: 0.6,
            days: 365,
            start_price: 100.0,
            start_day: date(2020, 1, 1),
        }
    }
}

/// Generates a daily GBM close path with synthesized candles.
///
/// Log increments are Gaussian with mean `drift/365` and standard deviation
/// `volatility/sqrt(365)`. High and low are synthesized as
/// `close +- |close - prev_close| / 2`; the open is the previous close
/// clamped into that range so every candle satisfies the OHLC invariants.
/// The first candle is flat at the start price.
pub fn gen_gbm(params: &GbmParams) -> Result<PriceSeries> {
    if params.days < 2 {
        return Err(Error::InvalidConfig(format!(
            "GBM needs at least 2 days, got {}",
            params.days
        )));
    }
    if params.volatility < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "GBM volatility must be non-negative, got {}",
            params.volatility
        )));
    }
    if !(params.start_price.is_finite() && params.start_price > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "GBM start price must be positive, got {}",
            params.start_price
        )));
    }
    let mu_d = params.drift / 365.0;
    let sigma_d = params.volatility / 365.0_f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut candles = Vec::with_capacity(params.days);
    candles.push(Candle {
        day: params.start_day,
        open: params.start_price,
        high: params.start_price,
        low: params.start_price,
        close: params.start_price,
        volume: 1.0,
    });
    let mut prev_close = params.start_price;
    for i in 1..params.days {
        let z: f64 = rng.sample(StandardNormal);
        let close = prev_close * (mu_d + sigma_d * z).exp();
        let half_move = (close - prev_close).abs() / 2.0;
        let high = close + half_move;
        let low = close - half_move;
        let open = prev_close.clamp(low, high);
        candles.push(Candle {
            day: params.start_day + chrono::Duration::days(i as i64),
            open,
            high,
            low,
            close,
            volume: 1.0,
        });
        prev_close = close;
    }
    PriceSeries::new(candles)
}

/// How a synthetic classifier distributes its mistakes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorModel {
    /// Each wrong class is equally likely.
    UniformOverWrong,
    /// Mistakes land on Neutral with probability 0.8 (when the true label
    /// is not Neutral); Neutral-labeled days split errors evenly.
    NeutralBiased,
}

impl ErrorModel {
    pub fn parse(s: &str) -> Option<ErrorModel> {
        match s {
            "uniform-over-wrong" => Some(ErrorModel::UniformOverWrong),
            "neutral-biased" => Some(ErrorModel::NeutralBiased),
            _ => None,
        }
    }
}

impl std::fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorModel::UniformOverWrong => write!(f, "uniform-over-wrong"),
            ErrorModel::NeutralBiased => write!(f, "neutral-biased"),
        }
    }
}

/// Synthetic per-tweet classifier parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticClassifierParams {
    pub seed: u64,
    pub accuracy: f64,
    pub tweets_per_day: usize,
    pub error_model: ErrorModel,
}

impl SyntheticClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.accuracy >= 1.0 / 3.0 && self.accuracy <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "classifier accuracy must lie in [1/3, 1], got {}",
                self.accuracy
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Sub-seed for day number `day_idx`: splitmix64 over seed XOR a
/// golden-ratio multiple of the index. Documented so parallel per-day
/// generation stays reproducible.
fn day_seed(seed: u64, day_idx: u64) -> u64 {
    splitmix64(seed ^ (day_idx.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15))
}

fn wrong_labels(truth: TrendLabel) -> [TrendLabel; 2] {
    match truth {
        TrendLabel::Bearish => [TrendLabel::Neutral, TrendLabel::Bullish],
        TrendLabel::Neutral => [TrendLabel::Bearish, TrendLabel::Bullish],
        TrendLabel::Bullish => [TrendLabel::Bearish, TrendLabel::Neutral],
    }
}

/// Emits `tweets_per_day` predictions per labeled day: the true label with
/// probability `accuracy`, otherwise an error drawn per the error model.
pub fn gen_predictions(
    daily: &BTreeMap<NaiveDate, TrendLabel>,
    params: &SyntheticClassifierParams,
) -> Result<Vec<Prediction>> {
    params.validate()?;
    let mut out = Vec::with_capacity(daily.len() * params.tweets_per_day);
    for (day_idx, (day, truth)) in daily.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(day_seed(params.seed, day_idx as u64));
        for k in 0..params.tweets_per_day {
            let predicted = if rng.gen::<f64>() < params.accuracy {
                *truth
            } else {
                let wrong = wrong_labels(*truth);
                match params.error_model {
                    ErrorModel::UniformOverWrong => wrong[rng.gen_range(0..2)],
                    ErrorModel::NeutralBiased => {
                        if *truth == TrendLabel::Neutral {
                            wrong[rng.gen_range(0..2)]
                        } else if rng.gen::<f64>() < 0.8 {
                            TrendLabel::Neutral
                        } else {
                            // The remaining non-neutral wrong class.
                            if *truth == TrendLabel::Bullish {
                                TrendLabel::Bearish
                            } else {
                                TrendLabel::Bullish
                            }
                        }
                    }
                }
            };
            out.push(Prediction {
                tweet_id: format!("synth-{day}-{k}"),
                day: *day,
                predicted,
                probs: None,
                fold: None,
            });
        }
    }
    Ok(out)
}
