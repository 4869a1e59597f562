//! Classification metrics over predictions vs market-derived labels.
//!
//! OVR treats all three classes symmetrically with macro averaging; OVO
//! restricts to samples whose true label is Bullish or Bearish (the
//! trading-relevant pair) and counts Neutral predictions as errors for
//! both classes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::TrendLabel;
use crate::signals::Prediction;

/// 3x3 counts; rows are true labels, columns predictions, both in the
/// canonical (Bearish, Neutral, Bullish) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn counts(&self) -> &[[u64; 3]; 3] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn count(&self, truth: TrendLabel, predicted: TrendLabel) -> u64 {
        self.counts[truth.encoding() as usize][predicted.encoding() as usize]
    }
}

/// Exact confusion counts over aligned label sequences.
pub fn confusion(
    true_labels: &[TrendLabel],
    predicted_labels: &[TrendLabel],
) -> Result<ConfusionMatrix> {
    if true_labels.is_empty() {
        return Err(Error::EmptyInput("confusion matrix needs >= 1 sample".into()));
    }
    if true_labels.len() != predicted_labels.len() {
        return Err(Error::LengthMismatch {
            left: true_labels.len(),
            right: predicted_labels.len(),
        });
    }
    let mut counts = [[0u64; 3]; 3];
    for (t, p) in true_labels.iter().zip(predicted_labels) {
        counts[t.encoding() as usize][p.encoding() as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Metric mode tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricMode {
    #[serde(rename = "OVR")]
    Ovr,
    #[serde(rename = "OVO+")]
    OvoPlus,
    #[serde(rename = "OVO-")]
    OvoMinus,
}

impl std::fmt::Display for MetricMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricMode::Ovr => write!(f, "OVR"),
            MetricMode::OvoPlus => write!(f, "OVO+"),
            MetricMode::OvoMinus => write!(f, "OVO-"),
        }
    }
}

/// Metric block for one evaluation mode. `degenerate` marks zero-division
/// fallbacks (a class with no predictions or no support contributed 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub mode: MetricMode,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_entropy: Option<f64>,
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// One-vs-rest metrics: accuracy is trace/total; precision, recall, and F1
/// are macro averages of the per-class values (per-class F1 first, then
/// the mean).
pub fn ovr_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let total = cm.total();
    let counts = cm.counts();
    let trace: u64 = (0..3).map(|i| counts[i][i]).sum();
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut degenerate = false;
    for c in 0..3 {
        let tp = counts[c][c];
        let col: u64 = (0..3).map(|r| counts[r][c]).sum();
        let row: u64 = counts[c].iter().sum();
        let p = if col > 0 {
            tp as f64 / col as f64
        } else {
            degenerate = true;
            0.0
        };
        let r = if row > 0 {
            tp as f64 / row as f64
        } else {
            degenerate = true;
            0.0
        };
        precision_sum += p;
        recall_sum += r;
        f1_sum += f1_of(p, r);
    }
    ClassMetrics {
        mode: MetricMode::Ovr,
        accuracy: trace as f64 / total as f64,
        precision: precision_sum / 3.0,
        recall: recall_sum / 3.0,
        f1: f1_sum / 3.0,
        support: total,
        degenerate,
        cross_entropy: None,
    }
}

/// One-vs-one metrics for the Bullish/Bearish pair.
///
/// Samples whose true label is Neutral are excluded; Neutral predictions
/// on the remaining samples are errors for both classes. `focus` is the
/// positive class; accuracy is shared across both focuses because it is
/// computed on the same restriction.
pub fn ovo_metrics(
    true_labels: &[TrendLabel],
    predicted_labels: &[TrendLabel],
    focus: TrendLabel,
) -> Result<ClassMetrics> {
    if focus == TrendLabel::Neutral {
        return Err(Error::InvalidConfig(
            "OVO focus must be Bullish or Bearish".into(),
        ));
    }
    if true_labels.len() != predicted_labels.len() {
        return Err(Error::LengthMismatch {
            left: true_labels.len(),
            right: predicted_labels.len(),
        });
    }
    let restricted: Vec<(TrendLabel, TrendLabel)> = true_labels
        .iter()
        .zip(predicted_labels)
        .filter(|(t, _)| **t != TrendLabel::Neutral)
        .map(|(t, p)| (*t, *p))
        .collect();
    if restricted.is_empty() {
        return Err(Error::EmptyInput(
            "no Bullish or Bearish samples for OVO metrics".into(),
        ));
    }
    let n = restricted.len() as f64;
    let correct = restricted.iter().filter(|(t, p)| t == p).count() as f64;
    let tp = restricted.iter().filter(|(t, p)| *t == focus && *p == focus).count() as f64;
    let fp = restricted.iter().filter(|(t, p)| *t != focus && *p == focus).count() as f64;
    let support = restricted.iter().filter(|(t, _)| *t == focus).count() as u64;
    let mut degenerate = false;
    let precision = if tp + fp > 0.0 {
        tp / (tp + fp)
    } else {
        degenerate = true;
        0.0
    };
    let recall = if support > 0 {
        tp / support as f64
    } else {
        degenerate = true;
        0.0
    };
    Ok(ClassMetrics {
        mode: if focus == TrendLabel::Bullish {
            MetricMode::OvoPlus
        } else {
            MetricMode::OvoMinus
        },
        accuracy: correct / n,
        precision,
        recall,
        f1: f1_of(precision, recall),
        support,
        degenerate,
        cross_entropy: None,
    })
}

/// Probability floor applied before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-probability of the true class.
pub fn cross_entropy(predictions: &[Prediction], true_labels: &[TrendLabel]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("cross-entropy needs >= 1 sample".into()));
    }
    if predictions.len() != true_labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: true_labels.len(),
        });
    }
    let mut acc = 0.0;
    for (i, (pred, truth)) in predictions.iter().zip(true_labels).enumerate() {
        let probs = pred.probs.ok_or(Error::MissingProbabilities(i))?;
        let p = probs[truth.encoding() as usize].max(PROB_FLOOR);
        acc -= p.ln();
    }
    Ok(acc / predictions.len() as f64)
}

/// Writes the per-mode metric blocks as a JSON array.
pub fn write_metrics_json(blocks: &[ClassMetrics], path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let json = serde_json::to_string_pretty(blocks).map_err(|e| Error::Json {
        path: path_str.clone(),
        source: e,
    })?;
    std::fs::write(path.as_ref(), json + "\n").map_err(|e| Error::io(&path_str, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::date;
    use TrendLabel::{Bearish as B, Bullish as U, Neutral as N};

    /// The fixed 12-sample worked example used across the metric tests.
    fn twelve_samples() -> (Vec<TrendLabel>, Vec<TrendLabel>) {
        (
            vec![B, B, B, B, N, N, N, U, U, U, U, U],
            vec![B, B, N, U, N, N, B, U, U, U, N, B],
        )
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let truth = vec![B, N, U, U, B, N];
        let cm = confusion(&truth, &truth).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(cm.counts()[t][p], 0);
                }
            }
        }
        let m = ovr_metrics(&cm);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn degenerate_all_neutral_predictor() {
        let truth = vec![B, B, N, N, U, U];
        let pred = vec![N; 6];
        let cm = confusion(&truth, &pred).unwrap();
        // Single nonzero column.
        for t in 0..3 {
            assert_eq!(cm.counts()[t][0], 0);
            assert_eq!(cm.counts()[t][2], 0);
        }
        let m = ovr_metrics(&cm);
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!(m.degenerate);
    }

    #[test]
    fn hand_tallied_confusion_matrix() {
        let (truth, pred) = twelve_samples();
        let cm = confusion(&truth, &pred).unwrap();
        assert_eq!(cm.counts(), &[[2, 1, 1], [1, 2, 0], [1, 1, 3]]);
        assert_eq!(cm.total(), 12);
    }

    #[test]
    fn hand_tallied_ovr_metrics() {
        let (truth, pred) = twelve_samples();
        let m = ovr_metrics(&confusion(&truth, &pred).unwrap());
        assert!((m.accuracy - 7.0 / 12.0).abs() < 1e-12);
        assert!((m.precision - 0.5833333333333334).abs() < 1e-12);
        assert!((m.recall - 0.5888888888888889).abs() < 1e-12);
        assert!((m.f1 - 0.5793650793650794).abs() < 1e-12);
        assert!(!m.degenerate);
    }

    #[test]
    fn ovo_perfect_pair() {
        let truth = vec![U, B];
        let pred = vec![U, B];
        let plus = ovo_metrics(&truth, &pred, U).unwrap();
        let minus = ovo_metrics(&truth, &pred, B).unwrap();
        assert_eq!(plus.accuracy, 1.0);
        assert_eq!(minus.accuracy, 1.0);
        assert_eq!(plus.f1, 1.0);
    }

    #[test]
    fn ovo_neutral_predictions_are_errors() {
        let truth = vec![U, U, B, B];
        let pred = vec![N, N, N, N];
        let plus = ovo_metrics(&truth, &pred, U).unwrap();
        assert_eq!(plus.accuracy, 0.0);
        assert_eq!(plus.recall, 0.0);
        assert!(plus.degenerate); // no positive predictions at all
    }

    #[test]
    fn ovo_hand_tallied_example() {
        let (truth, pred) = twelve_samples();
        let plus = ovo_metrics(&truth, &pred, U).unwrap();
        assert!((plus.accuracy - 5.0 / 9.0).abs() < 1e-12);
        assert!((plus.precision - 0.75).abs() < 1e-12);
        assert!((plus.recall - 0.6).abs() < 1e-12);
        assert!((plus.f1 - 0.6666666666666665).abs() < 1e-12);
        assert_eq!(plus.support, 5);

        let minus = ovo_metrics(&truth, &pred, B).unwrap();
        assert!((minus.accuracy - 5.0 / 9.0).abs() < 1e-12);
        assert!((minus.precision - 0.6666666666666666).abs() < 1e-12);
        assert!((minus.recall - 0.5).abs() < 1e-12);
        assert!((minus.f1 - 0.5714285714285715).abs() < 1e-12);
        assert_eq!(minus.support, 4);

        // Shared restriction, shared accuracy.
        assert_eq!(plus.accuracy, minus.accuracy);
    }

    #[test]
    fn ovo_rejects_neutral_focus_and_empty_restriction() {
        let (truth, pred) = twelve_samples();
        assert!(ovo_metrics(&truth, &pred, N).is_err());
        let all_neutral = vec![N, N];
        assert!(matches!(
            ovo_metrics(&all_neutral, &all_neutral, U),
            Err(Error::EmptyInput(_))
        ));
    }

    fn pred_with_probs(day_offset: i64, probs: [f64; 3]) -> Prediction {
        let winner = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        Prediction {
            tweet_id: format!("t{day_offset}"),
            day: date(2020, 1, 1) + chrono::Duration::days(day_offset),
            predicted: TrendLabel::from_encoding(winner as u8).unwrap(),
            probs: Some(probs),
            fold: None,
        }
    }

    #[test]
    fn cross_entropy_uniform_is_ln3() {
        let third = 1.0 / 3.0;
        let preds: Vec<Prediction> = (0..50).map(|i| pred_with_probs(i, [third; 3])).collect();
        let labels: Vec<TrendLabel> = (0..50)
            .map(|i| TrendLabel::from_encoding((i % 3) as u8).unwrap())
            .collect();
        let ce = cross_entropy(&preds, &labels).unwrap();
        assert!((ce - 1.0986122886681098).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_one_hot_correct_is_zero() {
        let preds = vec![
            pred_with_probs(0, [1.0, 0.0, 0.0]),
            pred_with_probs(1, [0.0, 0.0, 1.0]),
        ];
        let labels = vec![B, U];
        assert_eq!(cross_entropy(&preds, &labels).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_mixed_hand_sum() {
        // (-ln 0.7 - ln 0.3 - ln 0.8) / 3
        let preds = vec![
            pred_with_probs(0, [0.7, 0.2, 0.1]),
            pred_with_probs(1, [0.2, 0.5, 0.3]),
            pred_with_probs(2, [0.1, 0.1, 0.8]),
        ];
        let labels = vec![B, U, U];
        let ce = cross_entropy(&preds, &labels).unwrap();
        assert!((ce - 0.594597099859626).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_missing_probs() {
        let mut preds = vec![pred_with_probs(0, [0.7, 0.2, 0.1])];
        preds.push(Prediction {
            tweet_id: "x".into(),
            day: date(2020, 1, 2),
            predicted: B,
            probs: None,
            fold: None,
        });
        assert!(matches!(
            cross_entropy(&preds, &[B, B]),
            Err(Error::MissingProbabilities(1))
        ));
    }

    #[test]
    fn permutation_invariance() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (truth, pred) = twelve_samples();
        let base_ovr = ovr_metrics(&confusion(&truth, &pred).unwrap());
        let base_plus = ovo_metrics(&truth, &pred, U).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut indices: Vec<usize> = (0..truth.len()).collect();
        for _ in 0..10 {
            indices.shuffle(&mut rng);
            let t: Vec<TrendLabel> = indices.iter().map(|&i| truth[i]).collect();
            let p: Vec<TrendLabel> = indices.iter().map(|&i| pred[i]).collect();
            assert_eq!(ovr_metrics(&confusion(&t, &p).unwrap()), base_ovr);
            assert_eq!(ovo_metrics(&t, &p, U).unwrap(), base_plus);
        }
    }

    #[test]
    fn confusion_rejects_mismatched_lengths() {
        assert!(matches!(
            confusion(&[B, N], &[B]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(confusion(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn ovr_accuracy_is_exact_match_rate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(1..200);
            let truth: Vec<TrendLabel> = (0..n)
                .map(|_| TrendLabel::from_encoding(rng.gen_range(0..3)).unwrap())
                .collect();
            let pred: Vec<TrendLabel> = (0..n)
                .map(|_| TrendLabel::from_encoding(rng.gen_range(0..3)).unwrap())
                .collect();
            let matches = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
            let m = ovr_metrics(&confusion(&truth, &pred).unwrap());
            assert!((m.accuracy - matches as f64 / n as f64).abs() < 1e-12);
        }
    }
}
