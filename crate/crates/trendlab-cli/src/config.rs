//! Plain key=value run configuration with CLI override precedence.
//!
//! Unknown keys are rejected, every key has a default, and referenced
//! paths are validated before any stage runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use trendlab::backtest::StrategyKind;
use trendlab::signals::AggregationMethod;
use trendlab::synthetic::ErrorModel;
use trendlab::text_pipeline::PromptMode;

/// Ordered key/value store; values keep their textual form so the manifest
/// can echo the exact effective configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory the config file lived in; relative paths resolve here.
    base_dir: PathBuf,
}

pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("days", "400"),
    ("start_day", "2020-01-01"),
    ("drift", "0.0"),
    ("volatility", "0.6"),
    ("start_price", "100.0"),
    ("tau", "30"),
    ("f_upper", "1.0"),
    ("f_lower", "1.0"),
    ("v_max", "8"),
    ("min_trend_days", "2"),
    ("grid_f_upper", "0.75,1.0,1.25"),
    ("grid_f_lower", "0.75,1.0,1.25"),
    ("grid_v_max", "8,12"),
    ("interval_months", "6"),
    ("accuracy", "0.8"),
    ("tweets_per_day", "10"),
    ("error_model", "neutral-biased"),
    ("method", "majority"),
    ("t_bearish", "0.9"),
    ("t_bullish", "1.1"),
    ("strategy", "tbl"),
    ("base_fraction", "1.0"),
    ("fee_rate", "0.0"),
    ("confidence_sizing", "true"),
    ("risk_free_annual", "0.04"),
    ("days_per_year", "365"),
    ("normalize_window", "180"),
    ("rsi_period", "14"),
    ("roc_k", "1.0"),
    ("roc_window", "180"),
    ("prompt_mode", "CA"),
    ("tweets_path", "demo_tweets.jsonl"),
    ("out_dir", "out"),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = Result<T, ConfigError>;

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig {
            values: CONFIG_KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            base_dir: PathBuf::from("."),
        }
    }

    /// Loads a config file over the defaults. Lines are `key=value`; blank
    /// lines and `#` comments are ignored.
    pub fn load(path: &Path) -> CfgResult<Self> {
        let mut cfg = RunConfig::defaults();
        cfg.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one key, rejecting unknown names.
    pub fn set(&mut self, key: &str, value: &str) -> CfgResult<()> {
        if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `--set key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> CfgResult<()> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects key=value, got {item:?}")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .expect("every known key has a default")
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> CfgResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .parse::<T>()
            .map_err(|e| ConfigError(format!("bad value for {key}: {e}")))
    }

    pub fn date(&self, key: &str) -> CfgResult<NaiveDate> {
        NaiveDate::parse_from_str(self.get(key), "%Y-%m-%d")
            .map_err(|e| ConfigError(format!("bad date for {key}: {e}")))
    }

    pub fn f64_list(&self, key: &str) -> CfgResult<Vec<f64>> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| ConfigError(format!("bad value in {key}: {e}")))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> CfgResult<Vec<usize>> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| ConfigError(format!("bad value in {key}: {e}")))
            })
            .collect()
    }

    pub fn error_model(&self) -> CfgResult<ErrorModel> {
        ErrorModel::parse(self.get("error_model"))
            .ok_or_else(|| ConfigError(format!("bad error_model {:?}", self.get("error_model"))))
    }

    pub fn method(&self) -> CfgResult<AggregationMethod> {
        AggregationMethod::parse(self.get("method"))
            .ok_or_else(|| ConfigError(format!("bad method {:?}", self.get("method"))))
    }

    pub fn strategy(&self) -> CfgResult<StrategyKind> {
        StrategyKind::parse(self.get("strategy"))
            .ok_or_else(|| ConfigError(format!("bad strategy {:?}", self.get("strategy"))))
    }

    pub fn prompt_mode(&self) -> CfgResult<PromptMode> {
        PromptMode::parse(self.get("prompt_mode"))
            .ok_or_else(|| ConfigError(format!("bad prompt_mode {:?}", self.get("prompt_mode"))))
    }

    /// Resolves a path-valued key against the config file's directory.
    pub fn path(&self, key: &str) -> PathBuf {
        let raw = Path::new(self.get(key));
        if raw.is_absolute() {
            raw.to_path_buf()
        } else {
            self.base_dir.join(raw)
        }
    }

    /// Validates referenced input paths up front.
    pub fn validate_paths(&self) -> CfgResult<()> {
        let tweets = self.path("tweets_path");
        if !tweets.exists() {
            return Err(ConfigError(format!(
                "tweets_path {} does not exist",
                tweets.display()
            )));
        }
        Ok(())
    }

    pub fn print(&self) {
        for (k, v) in &self.values {
            println!("{k}={v}");
        }
    }
}
