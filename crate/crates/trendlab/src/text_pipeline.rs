//! Tweet preprocessing and prompt rendering.
//!
//! Preprocessing lowercases, strips URLs / user mentions / punctuation,
//! extracts hashtags and emojis before anything that would destroy them,
//! normalizes a closed cryptocurrency vocabulary by suffix rules, and drops
//! promotional content via a configurable regex ruleset.
//!
//! Prompt rendering pairs a cleaned tweet with market context. Three modes:
//! CUA (text only), CA (previous trend + ROC + RSI terms), and TCA (CA with
//! a date prefix). Templates are byte-stable; context always comes from the
//! window preceding the tweet's window and from indicator values at day-1,
//! so a prompt never encodes information from its own day or later.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{LabelSeries, TrendLabel};
use crate::market_data::{discretize_indicator, IndicatorKind, IndicatorSeries, IndicatorThresholds, TrendTerm};

/// A tweet as it arrives on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    #[serde(rename = "timestamp")]
    pub day: NaiveDate,
    pub text: String,
}

/// A preprocessed tweet. `dropped` tweets carry the rule id that fired.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTweet {
    pub id: String,
    pub day: NaiveDate,
    pub normalized_text: String,
    pub hashtags: Vec<String>,
    pub emojis: Vec<String>,
    pub dropped: bool,
    pub drop_rule: Option<String>,
}

/// One content filter: a rule id and its pattern.
#[derive(Debug, Clone)]
pub struct FilterRule {
    pub id: String,
    pub pattern: Regex,
}

/// Ordered filter rules; the first match wins.
#[derive(Debug, Clone)]
pub struct FilterRuleset {
    rules: Vec<FilterRule>,
}

impl FilterRuleset {
    pub fn empty() -> Self {
        FilterRuleset { rules: vec![] }
    }

    pub fn push(&mut self, id: &str, pattern: &str) -> Result<()> {
        let pattern = Regex::new(pattern)
            .map_err(|e| Error::InvalidConfig(format!("bad filter pattern for rule {id}: {e}")))?;
        self.rules.push(FilterRule {
            id: id.to_string(),
            pattern,
        });
        Ok(())
    }

    fn matching_rule(&self, text: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.pattern.is_match(text))
            .map(|r| r.id.as_str())
    }
}

impl Default for FilterRuleset {
    /// Promotional and spam patterns common in crypto feeds.
    fn default() -> Self {
        let mut set = FilterRuleset::empty();
        set.push(
            "promo",
            r"(?i)\b(airdrop|give\s?away|promo\s?code|referral|discount\s+code|presale\s+bonus)\b",
        )
        .unwrap();
        set.push(
            "promo",
            r"(?i)\bfree\b.{0,40}\b(btc|bitcoin|eth|crypto|coins?|tokens?|money|cash|nft)\b",
        )
        .unwrap();
        set.push(
            "spam",
            r"(?i)\b(click\s+(the\s+)?link|sign\s+up\s+(now|today)|join\s+(our|my)\s+(telegram|discord)|limited\s+(time\s+)?offer|dm\s+me\s+for)\b",
        )
        .unwrap();
        set
    }
}

fn url_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?://|www\.)\S+").unwrap())
}

fn mention_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

fn hashtag_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#\w+").unwrap())
}

/// Suffix normalization table for the closed crypto vocabulary. Values are
/// never keys, which keeps normalization idempotent.
fn vocab_table() -> &'static BTreeMap<&'static str, &'static str> {
    static TABLE: std::sync::OnceLock<BTreeMap<&'static str, &'static str>> =
        std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        BTreeMap::from([
            ("bitcoins", "bitcoin"),
            ("btcs", "btc"),
            ("coins", "coin"),
            ("tokens", "token"),
            ("altcoins", "altcoin"),
            ("sats", "sat"),
            ("satoshis", "satoshi"),
            ("hodling", "hodl"),
            ("hodler", "hodl"),
            ("hodlers", "hodl"),
            ("hodls", "hodl"),
            ("pumping", "pump"),
            ("pumped", "pump"),
            ("pumps", "pump"),
            ("dumping", "dump"),
            ("dumped", "dump"),
            ("dumps", "dump"),
            ("mooning", "moon"),
            ("moons", "moon"),
            ("bulls", "bull"),
            ("bears", "bear"),
            ("whales", "whale"),
            ("miners", "miner"),
            ("wallets", "wallet"),
            ("exchanges", "exchange"),
            ("airdrops", "airdrop"),
            ("shilling", "shill"),
            ("shilled", "shill"),
            ("rallies", "rally"),
            ("rallying", "rally"),
            ("dips", "dip"),
            ("dipping", "dip"),
            ("halvings", "halving"),
        ])
    })
}

fn is_emoji_base(c: char) -> bool {
    matches!(c as u32, 0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF)
}

fn is_emoji_extension(c: char) -> bool {
    matches!(c as u32, 0xFE0F | 0x200D | 0x1F3FB..=0x1F3FF)
}

/// Pulls emoji clusters out of `text`, returning the remaining text and the
/// clusters in order. Variation selectors, ZWJ, and skin tones attach to
/// the preceding base character.
fn extract_emojis(text: &str) -> (String, Vec<String>) {
    let mut rest = String::with_capacity(text.len());
    let mut emojis: Vec<String> = Vec::new();
    let mut in_cluster = false;
    for c in text.chars() {
        if is_emoji_base(c) {
            if in_cluster && emojis.last().map(|e| e.ends_with('\u{200D}')).unwrap_or(false) {
                emojis.last_mut().unwrap().push(c);
            } else {
                emojis.push(c.to_string());
            }
            in_cluster = true;
        } else if in_cluster && is_emoji_extension(c) {
            emojis.last_mut().unwrap().push(c);
        } else {
            rest.push(c);
            in_cluster = false;
        }
    }
    (rest, emojis)
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Deterministic tweet normalization plus promo filtering.
///
/// Hashtags and emojis are extracted before punctuation stripping. A tweet
/// that matches a filter rule, or that is empty once cleaned, comes back
/// with `dropped = true` and the triggering rule id.
pub fn preprocess_tweet(raw: &RawTweet, rules: &FilterRuleset) -> Result<CleanTweet> {
    if raw.text.trim().is_empty() {
        return Err(Error::EmptyInput(format!("tweet {} has no text", raw.id)));
    }
    let drop_rule = rules.matching_rule(&raw.text).map(str::to_string);

    let mut text = raw.text.to_lowercase();
    text = url_regex().replace_all(&text, " ").into_owned();
    text = mention_regex().replace_all(&text, " ").into_owned();

    let mut hashtags: Vec<String> = hashtag_regex()
        .find_iter(&text)
        .map(|m| m.as_str().to_string())
        .collect();
    hashtags.dedup();
    text = hashtag_regex().replace_all(&text, " ").into_owned();

    let (text, emojis) = extract_emojis(&text);

    let text: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();

    let table = vocab_table();
    let normalized_text = collapse_whitespace(&text)
        .split(' ')
        .map(|tok| table.get(tok).copied().unwrap_or(tok))
        .collect::<Vec<_>>()
        .join(" ");

    let (dropped, drop_rule) = match drop_rule {
        Some(rule) => (true, Some(rule)),
        None if normalized_text.is_empty() => (true, Some("empty".to_string())),
        None => (false, None),
    };
    Ok(CleanTweet {
        id: raw.id.clone(),
        day: raw.day,
        normalized_text,
        hashtags,
        emojis,
        dropped,
        drop_rule,
    })
}

/// Market context available before a day opens: the label of the previous
/// window and indicator terms from day-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptContext {
    pub day: NaiveDate,
    pub previous_label: TrendLabel,
    pub roc_term: TrendTerm,
    pub rsi_term: TrendTerm,
}

/// Assembles the prompt context for `day`.
///
/// The day must lie inside a labeled window with a predecessor, and both
/// indicators must be defined on the previous day.
pub fn build_context(
    day: NaiveDate,
    labels: &LabelSeries,
    roc: &IndicatorSeries,
    rsi: &IndicatorSeries,
    roc_thresholds: &IndicatorThresholds,
    rsi_thresholds: &IndicatorThresholds,
) -> Result<PromptContext> {
    let (idx, _) = labels.window_containing(day).ok_or_else(|| Error::NoContext {
        day: day.to_string(),
        reason: "day is outside the labeled range".into(),
    })?;
    if idx == 0 {
        return Err(Error::NoContext {
            day: day.to_string(),
            reason: "day lies in the first window, which has no predecessor".into(),
        });
    }
    let previous_label = labels.windows()[idx - 1].label;
    let prev_day = day.pred_opt().expect("date underflow");
    let roc_value = roc.value_on(prev_day).ok_or_else(|| Error::NoContext {
        day: day.to_string(),
        reason: format!("ROC undefined on {prev_day}"),
    })?;
    let rsi_value = rsi.value_on(prev_day).ok_or_else(|| Error::NoContext {
        day: day.to_string(),
        reason: format!("RSI undefined on {prev_day}"),
    })?;
    Ok(PromptContext {
        day,
        previous_label,
        roc_term: discretize_indicator(roc_value, IndicatorKind::Roc, roc_thresholds),
        rsi_term: discretize_indicator(rsi_value, IndicatorKind::Rsi, rsi_thresholds),
    })
}

/// Prompt template family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptMode {
    #[serde(rename = "CUA")]
    Cua,
    #[serde(rename = "CA")]
    Ca,
    #[serde(rename = "TCA")]
    Tca,
}

impl PromptMode {
    pub fn parse(s: &str) -> Option<PromptMode> {
        match s {
            "CUA" | "cua" => Some(PromptMode::Cua),
            "CA" | "ca" => Some(PromptMode::Ca),
            "TCA" | "tca" => Some(PromptMode::Tca),
            _ => None,
        }
    }
}

impl std::fmt::Display for PromptMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PromptMode::Cua => write!(f, "CUA"),
            PromptMode::Ca => write!(f, "CA"),
            PromptMode::Tca => write!(f, "TCA"),
        }
    }
}

/// A rendered prompt paired with its market-derived label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub day: NaiveDate,
    pub mode: PromptMode,
    #[serde(rename = "prompt")]
    pub prompt_text: String,
    pub label: TrendLabel,
}

const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Renders the byte-stable prompt for a tweet.
///
/// CUA uses the tweet text verbatim. CA prefixes the market context; TCA
/// additionally prefixes the date as `Date: YYYY, MonthName, DD, `. CA and
/// TCA require a context whose day matches the tweet's day.
pub fn render_prompt(
    ctx: Option<&PromptContext>,
    tweet: &CleanTweet,
    mode: PromptMode,
    label: TrendLabel,
) -> Result<PromptRecord> {
    if tweet.dropped {
        return Err(Error::DroppedTweet(tweet.id.clone()));
    }
    let prompt_text = match mode {
        PromptMode::Cua => tweet.normalized_text.clone(),
        PromptMode::Ca | PromptMode::Tca => {
            let ctx = ctx.ok_or_else(|| {
                Error::ModeContextMismatch(format!("{mode} prompts require a market context"))
            })?;
            if ctx.day != tweet.day {
                return Err(Error::ModeContextMismatch(format!(
                    "context day {} does not match tweet day {}",
                    ctx.day, tweet.day
                )));
            }
            let body = format!(
                "Previous Label: {}, ROC: {}, RSI: {}, Tweet: {}",
                ctx.previous_label, ctx.roc_term, ctx.rsi_term, tweet.normalized_text
            );
            match mode {
                PromptMode::Ca => body,
                PromptMode::Tca => format!(
                    "Date: {}, {}, {:02}, {}",
                    tweet.day.year(),
                    MONTH_NAMES[tweet.day.month0() as usize],
                    tweet.day.day(),
                    body
                ),
                PromptMode::Cua => unreachable!(),
            }
        }
    };
    Ok(PromptRecord {
        id: tweet.id.clone(),
        day: tweet.day,
        mode,
        prompt_text,
        label,
    })
}

/// Writes the prompt dataset JSONL contract:
/// `{"id","day","mode","prompt","label"}`. Returns the record count.
pub fn export_dataset(records: &[PromptRecord], path: impl AsRef<Path>) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prompt records to export".into()));
    }
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(&path_str, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Json {
            path: path_str.clone(),
            source: e,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(&path_str, e))?;
    }
    w.flush().map_err(|e| Error::io(&path_str, e))?;
    Ok(records.len())
}

/// Reads a prompt dataset back.
pub fn import_dataset(path: impl AsRef<Path>) -> Result<Vec<PromptRecord>> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path_str, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                path: path_str.clone(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} has no prompt records")));
    }
    Ok(out)
}

/// Reads the tweet JSONL contract: `{"id","timestamp","text"}`.
pub fn read_tweets_jsonl(path: impl AsRef<Path>) -> Result<Vec<RawTweet>> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(&path_str, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str::<RawTweet>(&line).map_err(|e| Error::MalformedRow {
                path: path_str.clone(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} has no tweets")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{label_series, BarrierConfig};
    use crate::market_data::{
        date, ewma_volatility, log_returns, roc, roc_thresholds, rsi, Candle, EwmaParams,
        PriceSeries, ROC_PERIOD,
    };
    use proptest::prelude::*;

    fn raw(id: &str, text: &str) -> RawTweet {
        RawTweet {
            id: id.to_string(),
            day: date(2020, 6, 15),
            text: text.to_string(),
        }
    }

    #[test]
    fn normalization_worked_example() {
        let t = preprocess_tweet(
            &raw("t1", "BTC to the moon! 🚀 https://t.co/x @user #bitcoin"),
            &FilterRuleset::default(),
        )
        .unwrap();
        assert_eq!(t.normalized_text, "btc to the moon");
        assert_eq!(t.hashtags, vec!["#bitcoin"]);
        assert_eq!(t.emojis, vec!["🚀"]);
        assert!(!t.dropped);
    }

    #[test]
    fn plain_text_is_untouched() {
        let t = preprocess_tweet(&raw("t2", "hello"), &FilterRuleset::default()).unwrap();
        assert_eq!(t.normalized_text, "hello");
        assert!(t.hashtags.is_empty());
        assert!(t.emojis.is_empty());
        assert!(!t.dropped);
    }

    #[test]
    fn promo_tweets_are_dropped_with_rule_id() {
        let t = preprocess_tweet(
            &raw("t3", "🔥🔥 FREE AIRDROP claim now 🔥🔥"),
            &FilterRuleset::default(),
        )
        .unwrap();
        assert!(t.dropped);
        assert_eq!(t.drop_rule.as_deref(), Some("promo"));
    }

    #[test]
    fn empty_after_cleaning_is_dropped() {
        let t = preprocess_tweet(&raw("t4", "@user https://t.co/x !!!"), &FilterRuleset::default())
            .unwrap();
        assert!(t.dropped);
        assert_eq!(t.drop_rule.as_deref(), Some("empty"));
        assert_eq!(t.normalized_text, "");
    }

    #[test]
    fn vocabulary_suffix_normalization() {
        let t = preprocess_tweet(
            &raw("t5", "Whales are pumping Bitcoins while bears are dumping"),
            &FilterRuleset::default(),
        )
        .unwrap();
        assert_eq!(t.normalized_text, "whale are pump bitcoin while bear are dump");
    }

    #[test]
    fn normalization_idempotent_on_example() {
        let first = preprocess_tweet(
            &raw("t6", "BTC to the moon! 🚀 https://t.co/x @user #bitcoin"),
            &FilterRuleset::default(),
        )
        .unwrap();
        let second = preprocess_tweet(
            &RawTweet {
                id: "t6".into(),
                day: first.day,
                text: first.normalized_text.clone(),
            },
            &FilterRuleset::default(),
        )
        .unwrap();
        assert_eq!(first.normalized_text, second.normalized_text);
    }

    proptest! {
        #[test]
        fn normalization_idempotent(text in "\\PC{1,80}") {
            let rules = FilterRuleset::empty();
            let Ok(first) = preprocess_tweet(&raw("p", &text), &rules) else { return Ok(()); };
            if first.normalized_text.is_empty() {
                return Ok(());
            }
            let second = preprocess_tweet(
                &RawTweet { id: "p".into(), day: first.day, text: first.normalized_text.clone() },
                &rules,
            ).unwrap();
            prop_assert_eq!(first.normalized_text, second.normalized_text);
        }
    }

    fn clean(day: NaiveDate, text: &str) -> CleanTweet {
        CleanTweet {
            id: "tweet".into(),
            day,
            normalized_text: text.to_string(),
            hashtags: vec![],
            emojis: vec![],
            dropped: false,
            drop_rule: None,
        }
    }

    fn example_context(day: NaiveDate) -> PromptContext {
        PromptContext {
            day,
            previous_label: TrendLabel::Bullish,
            roc_term: TrendTerm::Neutral,
            rsi_term: TrendTerm::Bearish,
        }
    }

    #[test]
    fn ca_prompt_byte_exact() {
        let day = date(2020, 1, 1);
        let record = render_prompt(
            Some(&example_context(day)),
            &clean(day, "bitcoin is on the rise!"),
            PromptMode::Ca,
            TrendLabel::Bullish,
        )
        .unwrap();
        assert_eq!(
            record.prompt_text,
            "Previous Label: bullish, ROC: neutral, RSI: bearish, Tweet: bitcoin is on the rise!"
        );
    }

    #[test]
    fn tca_prompt_byte_exact_date_prefix() {
        let day = date(2020, 1, 1);
        let record = render_prompt(
            Some(&example_context(day)),
            &clean(day, "bitcoin is on the rise!"),
            PromptMode::Tca,
            TrendLabel::Bullish,
        )
        .unwrap();
        assert!(record.prompt_text.starts_with("Date: 2020, January, 01, "));
        assert_eq!(
            record.prompt_text,
            "Date: 2020, January, 01, Previous Label: bullish, ROC: neutral, RSI: bearish, Tweet: bitcoin is on the rise!"
        );
    }

    #[test]
    fn cua_prompt_is_identity() {
        let day = date(2021, 11, 30);
        let record = render_prompt(
            None,
            &clean(day, "markets look shaky"),
            PromptMode::Cua,
            TrendLabel::Bearish,
        )
        .unwrap();
        assert_eq!(record.prompt_text, "markets look shaky");
    }

    #[test]
    fn render_is_byte_stable() {
        let day = date(2022, 7, 9);
        let ctx = example_context(day);
        let tweet = clean(day, "steady as she goes");
        let a = render_prompt(Some(&ctx), &tweet, PromptMode::Tca, TrendLabel::Neutral).unwrap();
        let b = render_prompt(Some(&ctx), &tweet, PromptMode::Tca, TrendLabel::Neutral).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn render_rejects_dropped_and_missing_context() {
        let day = date(2020, 1, 1);
        let mut dropped = clean(day, "spам");
        dropped.dropped = true;
        assert!(matches!(
            render_prompt(None, &dropped, PromptMode::Cua, TrendLabel::Neutral),
            Err(Error::DroppedTweet(_))
        ));
        assert!(matches!(
            render_prompt(None, &clean(day, "x"), PromptMode::Ca, TrendLabel::Neutral),
            Err(Error::ModeContextMismatch(_))
        ));
        let wrong_day_ctx = example_context(date(2020, 1, 2));
        assert!(matches!(
            render_prompt(Some(&wrong_day_ctx), &clean(day, "x"), PromptMode::Ca, TrendLabel::Neutral),
            Err(Error::ModeContextMismatch(_))
        ));
    }

    fn market_fixture(seed: u64) -> (PriceSeries, LabelSeries, IndicatorSeries, IndicatorSeries) {
        let prices = crate::synthetic::gen_gbm(&crate::synthetic::GbmParams {
            seed,
            days: 160,
            ..Default::default()
        })
        .unwrap();
        let vols = ewma_volatility(&log_returns(&prices).unwrap(), &EwmaParams::default()).unwrap();
        let labels = label_series(&prices, &vols, &BarrierConfig::default()).unwrap();
        let roc_series = roc(&prices, ROC_PERIOD).unwrap();
        let rsi_series = rsi(&prices, 14).unwrap();
        (prices, labels, roc_series, rsi_series)
    }

    #[test]
    fn context_uses_previous_window_and_prior_day() {
        let (prices, labels, roc_series, rsi_series) = market_fixture(3);
        let w1 = &labels.windows()[1];
        let day = w1.start_day;
        let returns = log_returns(&prices).unwrap();
        let pre_day: Vec<(NaiveDate, f64)> = returns
            .points()
            .iter()
            .filter(|(d, _)| *d < day)
            .cloned()
            .collect();
        let roc_th = roc_thresholds(
            &crate::market_data::ReturnSeries::new(pre_day),
            20,
            1.0,
        )
        .unwrap();
        let ctx = build_context(
            day,
            &labels,
            &roc_series,
            &rsi_series,
            &roc_th,
            &IndicatorThresholds::rsi_default(),
        )
        .unwrap();
        assert_eq!(ctx.previous_label, labels.windows()[0].label);
        let prev_day = day.pred_opt().unwrap();
        let expect_rsi = discretize_indicator(
            rsi_series.value_on(prev_day).unwrap(),
            IndicatorKind::Rsi,
            &IndicatorThresholds::rsi_default(),
        );
        assert_eq!(ctx.rsi_term, expect_rsi);
    }

    #[test]
    fn first_window_has_no_context() {
        let (_, labels, roc_series, rsi_series) = market_fixture(4);
        let day = labels.windows()[0].start_day;
        let err = build_context(
            day,
            &labels,
            &roc_series,
            &rsi_series,
            &IndicatorThresholds::new(-0.05, 0.05).unwrap(),
            &IndicatorThresholds::rsi_default(),
        );
        assert!(matches!(err, Err(Error::NoContext { .. })));
    }

    #[test]
    fn context_ignores_future_prices() {
        let (prices, labels, roc_series, rsi_series) = market_fixture(6);
        let day = labels.windows()[2].start_day + chrono::Duration::days(1);
        let cutoff_returns = |p: &PriceSeries| {
            let r = log_returns(p).unwrap();
            crate::market_data::ReturnSeries::new(
                r.points().iter().filter(|(d, _)| *d < day).cloned().collect(),
            )
        };
        let roc_th = roc_thresholds(&cutoff_returns(&prices), 20, 1.0).unwrap();
        let rsi_th = IndicatorThresholds::rsi_default();
        let base = build_context(day, &labels, &roc_series, &rsi_series, &roc_th, &rsi_th).unwrap();

        // Scale every candle from `day` onward and rebuild everything.
        let mutated: Vec<Candle> = prices
            .candles()
            .iter()
            .map(|c| {
                if c.day >= day {
                    Candle {
                        day: c.day,
                        open: c.open * 1.4,
                        high: c.high * 1.4,
                        low: c.low * 1.4,
                        close: c.close * 1.4,
                        volume: c.volume,
                    }
                } else {
                    *c
                }
            })
            .collect();
        let mprices = PriceSeries::new(mutated).unwrap();
        let mvols = ewma_volatility(&log_returns(&mprices).unwrap(), &EwmaParams::default()).unwrap();
        let mlabels = label_series(&mprices, &mvols, &BarrierConfig::default()).unwrap();
        let mroc = roc(&mprices, ROC_PERIOD).unwrap();
        let mrsi = rsi(&mprices, 14).unwrap();
        let mroc_th = roc_thresholds(&cutoff_returns(&mprices), 20, 1.0).unwrap();
        let mutated_ctx =
            build_context(day, &mlabels, &mroc, &mrsi, &mroc_th, &rsi_th).unwrap();
        assert_eq!(base, mutated_ctx);
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prompts.jsonl");
        let records: Vec<PromptRecord> = (0..3)
            .map(|i| PromptRecord {
                id: format!("r{i}"),
                day: date(2020, 5, 1) + chrono::Duration::days(i),
                mode: PromptMode::Ca,
                prompt_text: format!("prompt {i}"),
                label: TrendLabel::from_encoding((i % 3) as u8).unwrap(),
            })
            .collect();
        let n = export_dataset(&records, &path).unwrap();
        assert_eq!(n, 3);
        let back = import_dataset(&path).unwrap();
        assert_eq!(records, back);
        let raw = std::fs::read_to_string(&path).unwrap();
        let first = raw.lines().next().unwrap();
        assert!(first.contains("\"prompt\":\"prompt 0\""));
        assert!(first.contains("\"label\":\"bearish\""));
    }

    #[test]
    fn export_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_dataset(&[], dir.path().join("x.jsonl")),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn large_export_preserves_id_label_multiset() {
        use std::collections::BTreeMap;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.jsonl");
        let records: Vec<PromptRecord> = (0..10_000)
            .map(|i| PromptRecord {
                id: format!("id{}", i % 4000),
                day: date(2020, 1, 1) + chrono::Duration::days((i % 300) as i64),
                mode: PromptMode::Tca,
                prompt_text: format!("text {i}"),
                label: TrendLabel::from_encoding((i % 3) as u8).unwrap(),
            })
            .collect();
        export_dataset(&records, &path).unwrap();
        let back = import_dataset(&path).unwrap();
        let multiset = |rs: &[PromptRecord]| {
            let mut m: BTreeMap<(String, u8), usize> = BTreeMap::new();
            for r in rs {
                *m.entry((r.id.clone(), r.label.encoding())).or_default() += 1;
            }
            m
        };
        assert_eq!(multiset(&records), multiset(&back));
    }
}
