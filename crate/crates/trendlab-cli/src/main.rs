//! `trendlab` — command-line pipeline: label, optimize, prompts, aggregate,
//! evaluate, backtest, synth, and the all-in-one `pipeline` command.
//!
//! Exit codes: 1 configuration error, 2 data error, 3 internal invariant
//! violation.

mod config;
mod manifest;
mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};
use manifest::{config_map, Manifest};
use stages::{load_market, AggregateSpec, BacktestSpec, MarketBundle};
use trendlab::backtest::{StrategyConfig, StrategyKind};
use trendlab::error::Error as LibError;
use trendlab::labeling::{read_daily_csv, BarrierConfig};
use trendlab::market_data::GapPolicy;
use trendlab::optimizer::{OptimizationGrid, SharpeParams};
use trendlab::signals::{
    read_predictions_jsonl, read_signals_csv, write_predictions_jsonl, AggregationMethod,
    MeanThresholds,
};
use trendlab::synthetic::{gen_gbm, gen_predictions, GbmParams, SyntheticClassifierParams};
use trendlab::text_pipeline::PromptMode;

#[derive(Parser)]
#[command(name = "trendlab", version, about = "Market-derived trend labels, signals, and backtests")]
struct Cli {
    /// Cap worker threads (overrides TRENDLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Triple-barrier labeling of OHLCV data.
    Label(LabelArgs),
    /// Walk-forward barrier parameter search.
    Optimize(OptimizeArgs),
    /// Render prompt datasets from tweets and market context.
    Prompts(PromptsArgs),
    /// Aggregate per-tweet predictions into daily signals.
    Aggregate(AggregateArgs),
    /// Classification metrics against market-derived labels.
    Evaluate(EvaluateArgs),
    /// Run a trading strategy over a signal series.
    Backtest(BacktestArgs),
    /// Run every stage from one config file.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Seeded GBM price history in the OHLCV CSV format.
    Prices(SynthPricesArgs),
    /// Accuracy-controlled synthetic classifier predictions.
    Predictions(SynthPredictionsArgs),
}

#[derive(Args)]
struct SynthPricesArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    days: usize,
    /// Annualized drift.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// Annualized volatility.
    #[arg(long, default_value_t = 0.6)]
    volatility: f64,
    #[arg(long, default_value_t = 100.0)]
    start_price: f64,
    #[arg(long, default_value = "2020-01-01")]
    start_day: NaiveDate,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthPredictionsArgs {
    /// Daily label CSV produced by `label`.
    #[arg(long)]
    daily_labels: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    accuracy: f64,
    #[arg(long, default_value_t = 10)]
    tweets_per_day: usize,
    /// `uniform-over-wrong` or `neutral-biased`.
    #[arg(long, default_value = "neutral-biased")]
    error_model: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct MarketArgs {
    /// OHLCV CSV (`timestamp,open,high,low,close,volume`).
    #[arg(long)]
    ohlcv: PathBuf,
    /// Forward-fill missing calendar days instead of rejecting them.
    #[arg(long, value_parser = ["forward"])]
    fill_gaps: Option<String>,
    /// EWMA volatility window in days.
    #[arg(long, default_value_t = 30)]
    tau: usize,
}

impl MarketArgs {
    fn policy(&self) -> GapPolicy {
        if self.fill_gaps.is_some() {
            GapPolicy::ForwardFill
        } else {
            GapPolicy::Reject
        }
    }

    fn load(&self) -> Result<MarketBundle, CliError> {
        Ok(load_market(&self.ohlcv, self.policy(), self.tau)?)
    }
}

#[derive(Args, Clone, Copy)]
struct BarrierArgs {
    #[arg(long, default_value_t = 1.0)]
    f_upper: f64,
    #[arg(long, default_value_t = 1.0)]
    f_lower: f64,
    /// Vertical barrier in days (8..=15).
    #[arg(long, default_value_t = 8)]
    v_max: usize,
    #[arg(long, default_value_t = 2)]
    min_trend_days: usize,
}

impl BarrierArgs {
    fn build(&self) -> Result<BarrierConfig, CliError> {
        Ok(BarrierConfig::new(
            self.f_upper,
            self.f_lower,
            self.v_max,
            self.min_trend_days,
        )?)
    }
}

#[derive(Args, Clone, Copy)]
struct SharpeArgs {
    #[arg(long, default_value_t = 0.04)]
    risk_free_annual: f64,
    #[arg(long, default_value_t = 365)]
    days_per_year: u32,
}

impl SharpeArgs {
    fn build(&self) -> SharpeParams {
        SharpeParams {
            risk_free_annual: self.risk_free_annual,
            days_per_year: self.days_per_year,
        }
    }
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[command(flatten)]
    barrier: BarrierArgs,
    #[arg(long)]
    out_windows: PathBuf,
    #[arg(long)]
    out_daily: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Comma-separated upper barrier factor candidates.
    #[arg(long, value_delimiter = ',', default_values_t = default_factors())]
    grid_f_upper: Vec<f64>,
    /// Comma-separated lower barrier factor candidates.
    #[arg(long, value_delimiter = ',', default_values_t = default_factors())]
    grid_f_lower: Vec<f64>,
    /// Comma-separated vertical barrier candidates (8..=15).
    #[arg(long, value_delimiter = ',', default_values_t = (8..=15).collect::<Vec<usize>>())]
    grid_v_max: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    min_trend_days: usize,
    #[arg(long, default_value_t = 6)]
    interval_months: u32,
    #[command(flatten)]
    sharpe: SharpeArgs,
    #[arg(long)]
    out: PathBuf,
}

fn default_factors() -> Vec<f64> {
    (0..=10).map(|i| 0.5 + 0.25 * i as f64).collect()
}

#[derive(Args)]
struct PromptsArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[command(flatten)]
    barrier: BarrierArgs,
    /// Tweet JSONL (`{"id","timestamp","text"}`).
    #[arg(long)]
    tweets: PathBuf,
    /// CUA, CA, or TCA.
    #[arg(long, default_value = "CA")]
    mode: String,
    #[arg(long, default_value_t = 14)]
    rsi_period: usize,
    /// Scale factor on the 8-day return standard deviation.
    #[arg(long, default_value_t = 1.0)]
    roc_k: f64,
    /// Trailing window for ROC threshold adaptation, in days.
    #[arg(long, default_value_t = 180)]
    roc_window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    /// Prediction JSONL (`{"tweet_id","day","class","probs"?,"fold"?}`).
    #[arg(long)]
    predictions: PathBuf,
    /// `majority` or `mean`.
    #[arg(long, default_value = "majority")]
    method: String,
    #[arg(long, default_value_t = 0.9)]
    t_bearish: f64,
    #[arg(long, default_value_t = 1.1)]
    t_bullish: f64,
    /// Fit mean thresholds walk-forward on six-month intervals.
    #[arg(long)]
    optimize_thresholds: bool,
    /// OHLCV CSV; required with --optimize-thresholds, also pins the
    /// signal calendar to the price calendar when given.
    #[arg(long)]
    ohlcv: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    interval_months: u32,
    #[arg(long, default_value_t = 180)]
    normalize_window: usize,
    #[command(flatten)]
    sharpe: SharpeArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Daily label CSV produced by `label`.
    #[arg(long)]
    daily_labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// Signal CSV produced by `aggregate`.
    #[arg(long)]
    signals: PathBuf,
    #[command(flatten)]
    market: MarketArgs,
    /// tbl, in-out-long, in-out-short, buy-hold, or sell-hold.
    #[arg(long)]
    strategy: String,
    #[command(flatten)]
    barrier: BarrierArgs,
    #[arg(long, default_value_t = 1.0)]
    base_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    fee_rate: f64,
    /// Scale position size by normalized confidence.
    #[arg(long)]
    confidence_sizing: bool,
    #[command(flatten)]
    sharpe: SharpeArgs,
    #[arg(long)]
    out_trades: PathBuf,
    #[arg(long)]
    out_equity: PathBuf,
    #[arg(long)]
    out_report: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

/// Error wrapper that knows its exit code.
struct CliError {
    code: u8,
    message: String,
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        let code = match &e {
            LibError::InvalidConfig(_) => 1,
            LibError::Internal(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads(cli.threads);
    let outcome = std::panic::catch_unwind(move || run(cli.command));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            eprintln!("internal invariant violation: {msg}");
            ExitCode::from(3)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("TRENDLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(SynthCommand::Prices(args)) => synth_prices(args),
        Command::Synth(SynthCommand::Predictions(args)) => synth_predictions(args),
        Command::Label(args) => label(args),
        Command::Optimize(args) => optimize(args),
        Command::Prompts(args) => prompts(args),
        Command::Aggregate(args) => aggregate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Backtest(args) => backtest(args),
        Command::Pipeline(args) => pipeline(args),
    }
}

fn synth_prices(args: SynthPricesArgs) -> Result<(), CliError> {
    let params = GbmParams {
        seed: args.seed,
        drift: args.drift,
        volatility: args.volatility,
        days: args.days,
        start_price: args.start_price,
        start_day: args.start_day,
    };
    let prices = gen_gbm(&params)?;
    prices.write_ohlcv(&args.out)?;
    Manifest::new(
        "synth prices",
        vec![],
        config_map(&[
            ("seed", args.seed.to_string()),
            ("days", args.days.to_string()),
            ("drift", args.drift.to_string()),
            ("volatility", args.volatility.to_string()),
            ("start_price", args.start_price.to_string()),
            ("start_day", args.start_day.to_string()),
        ]),
    )
    .with_seed(args.seed)
    .write_for(&args.out)?;
    println!("wrote {} candles to {}", prices.len(), args.out.display());
    Ok(())
}

fn synth_predictions(args: SynthPredictionsArgs) -> Result<(), CliError> {
    let daily = read_daily_csv(&args.daily_labels)?;
    let error_model = trendlab::synthetic::ErrorModel::parse(&args.error_model)
        .ok_or_else(|| ConfigError(format!("bad error model {:?}", args.error_model)))?;
    let params = SyntheticClassifierParams {
        seed: args.seed,
        accuracy: args.accuracy,
        tweets_per_day: args.tweets_per_day,
        error_model,
    };
    let preds = gen_predictions(&daily, &params)?;
    let n = write_predictions_jsonl(&preds, &args.out)?;
    Manifest::new(
        "synth predictions",
        vec![args.daily_labels.display().to_string()],
        config_map(&[
            ("seed", args.seed.to_string()),
            ("accuracy", args.accuracy.to_string()),
            ("tweets_per_day", args.tweets_per_day.to_string()),
            ("error_model", args.error_model.clone()),
        ]),
    )
    .with_seed(args.seed)
    .write_for(&args.out)?;
    println!("wrote {n} predictions to {}", args.out.display());
    Ok(())
}

fn label(args: LabelArgs) -> Result<(), CliError> {
    let bundle = args.market.load()?;
    let config = args.barrier.build()?;
    let (labeled, daily) =
        stages::stage_label(&bundle, &config, &args.out_windows, &args.out_daily)?;
    Manifest::new(
        "label",
        vec![args.market.ohlcv.display().to_string()],
        config_map(&[
            ("tau", args.market.tau.to_string()),
            ("f_upper", config.f_upper.to_string()),
            ("f_lower", config.f_lower.to_string()),
            ("v_max", config.v_max.to_string()),
            ("min_trend_days", config.min_trend_days.to_string()),
        ]),
    )
    .write_for(&args.out_windows)?;
    println!(
        "labeled {} windows covering {} days",
        labeled.windows().len(),
        daily.len()
    );
    Ok(())
}

fn optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let bundle = args.market.load()?;
    let grid = OptimizationGrid {
        f_upper: args.grid_f_upper.clone(),
        f_lower: args.grid_f_lower.clone(),
        v_max: args.grid_v_max.clone(),
        min_trend_days: args.min_trend_days,
    };
    let periods = stages::stage_optimize(
        &bundle,
        &grid,
        args.interval_months,
        &args.sharpe.build(),
        &args.out,
    )?;
    Manifest::new(
        "optimize",
        vec![args.market.ohlcv.display().to_string()],
        config_map(&[
            ("tau", args.market.tau.to_string()),
            ("grid_f_upper", join_f64(&args.grid_f_upper)),
            ("grid_f_lower", join_f64(&args.grid_f_lower)),
            ("grid_v_max", join_usize(&args.grid_v_max)),
            ("interval_months", args.interval_months.to_string()),
            ("risk_free_annual", args.sharpe.risk_free_annual.to_string()),
            ("days_per_year", args.sharpe.days_per_year.to_string()),
        ]),
    )
    .write_for(&args.out)?;
    for p in &periods {
        println!(
            "{}..{}: f_upper={} f_lower={} v_max={} sharpe={:.4}",
            p.start, p.end, p.config.f_upper, p.config.f_lower, p.config.v_max, p.sharpe
        );
    }
    Ok(())
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn prompts(args: PromptsArgs) -> Result<(), CliError> {
    let mode = PromptMode::parse(&args.mode)
        .ok_or_else(|| ConfigError(format!("bad prompt mode {:?}", args.mode)))?;
    let bundle = args.market.load()?;
    let config = args.barrier.build()?;
    let labeled = trendlab::labeling::label_series(&bundle.prices, &bundle.vols, &config)?;
    let daily = trendlab::labeling::daily_labels(&labeled);
    let stats = stages::stage_prompts(
        &bundle,
        &labeled,
        &daily,
        &args.tweets,
        mode,
        args.rsi_period,
        args.roc_k,
        args.roc_window,
        &args.out,
    )?;
    Manifest::new(
        "prompts",
        vec![
            args.market.ohlcv.display().to_string(),
            args.tweets.display().to_string(),
        ],
        config_map(&[
            ("mode", mode.to_string()),
            ("tau", args.market.tau.to_string()),
            ("f_upper", config.f_upper.to_string()),
            ("f_lower", config.f_lower.to_string()),
            ("v_max", config.v_max.to_string()),
            ("min_trend_days", config.min_trend_days.to_string()),
            ("rsi_period", args.rsi_period.to_string()),
            ("roc_k", args.roc_k.to_string()),
            ("roc_window", args.roc_window.to_string()),
        ]),
    )
    .write_for(&args.out)?;
    println!(
        "wrote {} prompts ({} dropped, {} without context, {} unlabeled)",
        stats.written, stats.dropped, stats.no_context, stats.unlabeled
    );
    Ok(())
}

fn aggregate(args: AggregateArgs) -> Result<(), CliError> {
    let method = AggregationMethod::parse(&args.method)
        .ok_or_else(|| ConfigError(format!("bad method {:?}", args.method)))?;
    let predictions = read_predictions_jsonl(&args.predictions)?;
    let prices = match &args.ohlcv {
        Some(path) => Some(trendlab::market_data::PriceSeries::load_ohlcv(
            path,
            GapPolicy::Reject,
        )?),
        None => None,
    };
    if args.optimize_thresholds && prices.is_none() {
        return Err(ConfigError("--optimize-thresholds requires --ohlcv".into()).into());
    }
    let range = match &prices {
        Some(p) => (p.first_day(), p.last_day()),
        None => {
            let min = predictions.iter().map(|p| p.day).min().unwrap();
            let max = predictions.iter().map(|p| p.day).max().unwrap();
            (min, max)
        }
    };
    let spec = AggregateSpec {
        method,
        static_thresholds: MeanThresholds::new(args.t_bearish, args.t_bullish)?,
        optimize: args.optimize_thresholds,
        interval_months: args.interval_months,
        normalize_window: args.normalize_window,
        sharpe: args.sharpe.build(),
    };
    let series = stages::stage_aggregate(&predictions, range, &spec, prices.as_ref(), &args.out)?;
    let mut inputs = vec![args.predictions.display().to_string()];
    if let Some(p) = &args.ohlcv {
        inputs.push(p.display().to_string());
    }
    Manifest::new(
        "aggregate",
        inputs,
        config_map(&[
            ("method", method.to_string()),
            ("t_bearish", args.t_bearish.to_string()),
            ("t_bullish", args.t_bullish.to_string()),
            ("optimize_thresholds", args.optimize_thresholds.to_string()),
            ("interval_months", args.interval_months.to_string()),
            ("normalize_window", args.normalize_window.to_string()),
        ]),
    )
    .write_for(&args.out)?;
    println!(
        "aggregated {} predictions into {} signal days",
        predictions.len(),
        series.len()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let predictions = read_predictions_jsonl(&args.predictions)?;
    let daily = read_daily_csv(&args.daily_labels)?;
    let blocks = stages::stage_evaluate(&predictions, &daily, &args.out)?;
    Manifest::new(
        "evaluate",
        vec![
            args.predictions.display().to_string(),
            args.daily_labels.display().to_string(),
        ],
        BTreeMap::new(),
    )
    .write_for(&args.out)?;
    for b in &blocks {
        println!(
            "{}: accuracy={:.4} precision={:.4} recall={:.4} f1={:.4}",
            b.mode, b.accuracy, b.precision, b.recall, b.f1
        );
    }
    Ok(())
}

fn backtest(args: BacktestArgs) -> Result<(), CliError> {
    let kind = StrategyKind::parse(&args.strategy)
        .ok_or_else(|| ConfigError(format!("bad strategy {:?}", args.strategy)))?;
    let bundle = args.market.load()?;
    let signals = read_signals_csv(&args.signals)?;
    let strategy = StrategyConfig {
        kind,
        barrier: if kind == StrategyKind::Tbl {
            Some(args.barrier.build()?)
        } else {
            None
        },
        base_fraction: args.base_fraction,
        fee_rate: args.fee_rate,
        confidence_sizing: args.confidence_sizing,
    };
    let spec = BacktestSpec {
        strategy,
        sharpe: args.sharpe.build(),
    };
    let report = stages::stage_backtest(
        &signals,
        &bundle,
        &spec,
        &args.out_trades,
        &args.out_equity,
        &args.out_report,
    )?;
    Manifest::new(
        "backtest",
        vec![
            args.signals.display().to_string(),
            args.market.ohlcv.display().to_string(),
        ],
        config_map(&[
            ("strategy", kind.to_string()),
            ("tau", args.market.tau.to_string()),
            ("f_upper", args.barrier.f_upper.to_string()),
            ("f_lower", args.barrier.f_lower.to_string()),
            ("v_max", args.barrier.v_max.to_string()),
            ("min_trend_days", args.barrier.min_trend_days.to_string()),
            ("base_fraction", args.base_fraction.to_string()),
            ("fee_rate", args.fee_rate.to_string()),
            ("confidence_sizing", args.confidence_sizing.to_string()),
            ("risk_free_annual", args.sharpe.risk_free_annual.to_string()),
            ("days_per_year", args.sharpe.days_per_year.to_string()),
        ]),
    )
    .write_for(&args.out_report)?;
    println!(
        "{} closed trades, daily return {:.4}%, max drawdown {:.2}%",
        report.closed_trades, report.daily_return_pct, report.max_drawdown_pct
    );
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::defaults(),
    };
    cfg.apply_overrides(&args.overrides)?;
    if args.print_config {
        cfg.print();
        return Ok(());
    }
    cfg.validate_paths()?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.entries()["out_dir"].clone()));
    std::fs::create_dir_all(&out_dir)?;
    run_pipeline(&cfg, &out_dir)
}

fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let config_echo = cfg.entries().clone();
    let seed: u64 = cfg.parse("seed")?;
    let manifest = |command: &str, inputs: Vec<String>, seeded: bool| {
        let m = Manifest::new(command, inputs, config_echo.clone());
        if seeded {
            m.with_seed(seed)
        } else {
            m
        }
    };

    // 1. Synthetic prices.
    let prices_path = out_dir.join("prices.csv");
    let gbm = GbmParams {
        seed,
        drift: cfg.parse("drift")?,
        volatility: cfg.parse("volatility")?,
        days: cfg.parse("days")?,
        start_price: cfg.parse("start_price")?,
        start_day: cfg.date("start_day")?,
    };
    let prices = gen_gbm(&gbm)?;
    prices.write_ohlcv(&prices_path)?;
    manifest("pipeline:synth-prices", vec![], true).write_for(&prices_path)?;

    let tau: usize = cfg.parse("tau")?;
    let bundle = load_market(&prices_path, GapPolicy::Reject, tau)?;

    // 2. Labeling.
    let windows_path = out_dir.join("windows.csv");
    let daily_path = out_dir.join("daily_labels.csv");
    let barrier = BarrierConfig::new(
        cfg.parse("f_upper")?,
        cfg.parse("f_lower")?,
        cfg.parse("v_max")?,
        cfg.parse("min_trend_days")?,
    )?;
    let (labeled, daily) = stages::stage_label(&bundle, &barrier, &windows_path, &daily_path)?;
    manifest(
        "pipeline:label",
        vec![prices_path.display().to_string()],
        false,
    )
    .write_for(&windows_path)?;

    let sharpe = SharpeParams {
        risk_free_annual: cfg.parse("risk_free_annual")?,
        days_per_year: cfg.parse("days_per_year")?,
    };

    // 3. Barrier parameter journal.
    let journal_path = out_dir.join("params.csv");
    let grid = OptimizationGrid {
        f_upper: cfg.f64_list("grid_f_upper")?,
        f_lower: cfg.f64_list("grid_f_lower")?,
        v_max: cfg.usize_list("grid_v_max")?,
        min_trend_days: cfg.parse("min_trend_days")?,
    };
    stages::stage_optimize(&bundle, &grid, cfg.parse("interval_months")?, &sharpe, &journal_path)?;
    manifest(
        "pipeline:optimize",
        vec![prices_path.display().to_string()],
        false,
    )
    .write_for(&journal_path)?;

    // 4. Prompt rendering from the bundled tweets.
    let prompts_path = out_dir.join("prompts.jsonl");
    let tweets_path = cfg.path("tweets_path");
    let stats = stages::stage_prompts(
        &bundle,
        &labeled,
        &daily,
        &tweets_path,
        cfg.prompt_mode()?,
        cfg.parse("rsi_period")?,
        cfg.parse("roc_k")?,
        cfg.parse("roc_window")?,
        &prompts_path,
    )?;
    manifest(
        "pipeline:prompts",
        vec![
            prices_path.display().to_string(),
            tweets_path.display().to_string(),
        ],
        false,
    )
    .write_for(&prompts_path)?;

    // 5. Synthetic classifier predictions.
    let preds_path = out_dir.join("predictions.jsonl");
    let classifier = SyntheticClassifierParams {
        seed,
        accuracy: cfg.parse("accuracy")?,
        tweets_per_day: cfg.parse("tweets_per_day")?,
        error_model: cfg.error_model()?,
    };
    let preds = gen_predictions(&daily, &classifier)?;
    write_predictions_jsonl(&preds, &preds_path)?;
    manifest(
        "pipeline:synth-predictions",
        vec![daily_path.display().to_string()],
        true,
    )
    .write_for(&preds_path)?;

    // 6. Signal aggregation over the price calendar.
    let signals_path = out_dir.join("signals.csv");
    let spec = AggregateSpec {
        method: cfg.method()?,
        static_thresholds: MeanThresholds::new(cfg.parse("t_bearish")?, cfg.parse("t_bullish")?)?,
        optimize: false,
        interval_months: cfg.parse("interval_months")?,
        normalize_window: cfg.parse("normalize_window")?,
        sharpe,
    };
    let signals = stages::stage_aggregate(
        &preds,
        (bundle.prices.first_day(), bundle.prices.last_day()),
        &spec,
        Some(&bundle.prices),
        &signals_path,
    )?;
    manifest(
        "pipeline:aggregate",
        vec![preds_path.display().to_string()],
        false,
    )
    .write_for(&signals_path)?;

    // 7. Classification metrics.
    let metrics_path = out_dir.join("metrics.json");
    stages::stage_evaluate(&preds, &daily, &metrics_path)?;
    manifest(
        "pipeline:evaluate",
        vec![
            preds_path.display().to_string(),
            daily_path.display().to_string(),
        ],
        false,
    )
    .write_for(&metrics_path)?;

    // 8. Backtest.
    let kind = cfg.strategy()?;
    let strategy = StrategyConfig {
        kind,
        barrier: if kind == StrategyKind::Tbl {
            Some(barrier)
        } else {
            None
        },
        base_fraction: cfg.parse("base_fraction")?,
        fee_rate: cfg.parse("fee_rate")?,
        confidence_sizing: cfg.parse("confidence_sizing")?,
    };
    let trades_path = out_dir.join("trades.csv");
    let equity_path = out_dir.join("equity.csv");
    let report_path = out_dir.join("report.json");
    let report = stages::stage_backtest(
        &signals,
        &bundle,
        &BacktestSpec { strategy, sharpe },
        &trades_path,
        &equity_path,
        &report_path,
    )?;
    manifest(
        "pipeline:backtest",
        vec![
            signals_path.display().to_string(),
            prices_path.display().to_string(),
        ],
        false,
    )
    .write_for(&report_path)?;

    println!(
        "pipeline complete: {} prompts, {} predictions, {} trades, artifacts in {}",
        stats.written,
        preds.len(),
        report.closed_trades,
        out_dir.display()
    );
    Ok(())
}
