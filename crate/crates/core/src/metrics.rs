//! Binary-classification metrics over truths and predicted probabilities.
//!
//! Label metrics threshold scores at 0.5 (a score of exactly 0.5 counts as
//! class 1). `roc_auc_score` ranks the raw scores and `hinge_loss` uses the
//! margin `2s - 1`. Metrics whose denominator vanishes return `Ok(None)`
//! rather than a made-up number.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    AccuracyScore,
    CohenKappaScore,
    F1Score,
    HammingLoss,
    HingeLoss,
    JaccardScore,
    MatthewsCorrcoef,
    PrecisionScore,
    RecallScore,
    RocAucScore,
    ZeroOneLoss,
}

impl MetricId {
    pub const ALL: [MetricId; 11] = [
        MetricId::AccuracyScore,
        MetricId::CohenKappaScore,
        MetricId::F1Score,
        MetricId::HammingLoss,
        MetricId::HingeLoss,
        MetricId::JaccardScore,
        MetricId::MatthewsCorrcoef,
        MetricId::PrecisionScore,
        MetricId::RecallScore,
        MetricId::RocAucScore,
        MetricId::ZeroOneLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::AccuracyScore => "accuracy_score",
            MetricId::CohenKappaScore => "cohen_kappa_score",
            MetricId::F1Score => "f1_score",
            MetricId::HammingLoss => "hamming_loss",
            MetricId::HingeLoss => "hinge_loss",
            MetricId::JaccardScore => "jaccard_score",
            MetricId::MatthewsCorrcoef => "matthews_corrcoef",
            MetricId::PrecisionScore => "precision_score",
            MetricId::RecallScore => "recall_score",
            MetricId::RocAucScore => "roc_auc_score",
            MetricId::ZeroOneLoss => "zero_one_loss",
        }
    }

    pub fn direction(self) -> MetricDirection {
        direction_of(self)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDirection {
    Maximize,
    Minimize,
}

pub fn direction_of(m: MetricId) -> MetricDirection {
    match m {
        MetricId::HammingLoss | MetricId::HingeLoss | MetricId::ZeroOneLoss => {
            MetricDirection::Minimize
        }
        _ => MetricDirection::Maximize,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("y_true has {truths} entries but scores has {scores}")]
    LengthMismatch { truths: usize, scores: usize },
    #[error("cannot score an empty sequence")]
    Empty,
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
}

/// Counts of the 2x2 confusion matrix with class 1 as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: u8, pred: u8) {
        match (truth, pred) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Threshold a probability into a label.
pub fn label_of(score: f64) -> u8 {
    u8::from(score >= 0.5)
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        c.add(t, p);
    }
    c
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub fn compute_metric(m: MetricId, y_true: &[u8], scores: &[f64]) -> Result<Option<f64>, MetricError> {
    if y_true.len() != scores.len() {
        return Err(MetricError::LengthMismatch {
            truths: y_true.len(),
            scores: scores.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(&y) = y_true.iter().find(|&&y| y > 1) {
        return Err(MetricError::NonBinaryLabel(y));
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricError::ScoreOutOfRange(s));
    }

    let preds: Vec<u8> = scores.iter().map(|&s| label_of(s)).collect();
    let c = confusion(y_true, &preds);
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let n = tp + fp + tn + fn_;
    let positives = tp + fn_;
    let single_class = positives == 0.0 || positives == n;

    let value = match m {
        MetricId::AccuracyScore => Some((tp + tn) / n),
        MetricId::ZeroOneLoss | MetricId::HammingLoss => Some((fp + fn_) / n),
        MetricId::PrecisionScore => ratio(tp, tp + fp),
        MetricId::RecallScore => ratio(tp, tp + fn_),
        MetricId::F1Score => ratio(2.0 * tp, 2.0 * tp + fp + fn_),
        MetricId::JaccardScore => ratio(tp, tp + fp + fn_),
        MetricId::CohenKappaScore => {
            if single_class {
                None
            } else {
                let p_o = (tp + tn) / n;
                let p_e = (positives * (tp + fp) + (tn + fp) * (tn + fn_)) / (n * n);
                ratio(p_o - p_e, 1.0 - p_e)
            }
        }
        MetricId::MatthewsCorrcoef => {
            if single_class {
                None
            } else {
                let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
                ratio(tp * tn - fp * fn_, den)
            }
        }
        MetricId::RocAucScore => {
            if single_class {
                None
            } else {
                Some(rank_auc(y_true, scores, positives, n - positives))
            }
        }
        MetricId::HingeLoss => {
            let total: f64 = y_true
                .iter()
                .zip(scores)
                .map(|(&y, &s)| {
                    let sign = if y == 1 { 1.0 } else { -1.0 };
                    (1.0 - sign * (2.0 * s - 1.0)).max(0.0)
                })
                .sum();
            Some(total / n)
        }
    };
    Ok(value)
}

/// Mann-Whitney statistic from mid-ranks; tied scores share rank credit.
fn rank_auc(y_true: &[u8], scores: &[f64], n_pos: f64, n_neg: f64) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; the tied block i..=j shares their average.
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if y_true[k] == 1 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j + 1;
    }
    (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}
