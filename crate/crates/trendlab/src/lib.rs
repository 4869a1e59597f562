//! Market-derived trend labeling, signal aggregation, and backtesting.
//!
//! The crate turns daily OHLCV history into path-dependent trend labels
//! (triple-barrier method), aggregates per-tweet classifier predictions
//! into daily trading signals, and backtests those signals across market
//! regimes. The language model itself stays outside the crate: prompts go
//! out as JSONL, predictions come back as JSONL.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`market_data`] — OHLCV ingestion, log returns, EWMA volatility, RSI/ROC
//! - [`labeling`] — triple-barrier trend windows and daily labels
//! - [`optimizer`] — walk-forward grid search of barrier parameters
//! - [`text_pipeline`] — tweet preprocessing and prompt rendering
//! - [`signals`] — majority/mean aggregation of predictions into signals
//! - [`evaluation`] — OVR/OVO classification metrics and cross-entropy
//! - [`backtest`] — TBL and In-Out strategies, performance reporting
//! - [`synthetic`] — seeded GBM prices and synthetic classifiers for testing

pub mod backtest;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod market_data;
pub mod optimizer;
pub mod signals;
pub mod synthetic;
pub mod text_pipeline;

pub use error::{Error, Result};
pub use labeling::TrendLabel;
