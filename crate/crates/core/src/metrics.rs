//! Binary classification metrics over positive-class probabilities.
//!
//! ROC-AUC is computed as the Mann-Whitney statistic in integer half-credits:
//! every (positive, negative) pair contributes 2 if the positive scores
//! higher, 1 on a tie and 0 otherwise. Keeping the numerator integral means
//! any two routes that count the same pairs produce the same `f64`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric undefined for an empty set")]
    Empty,
    #[error("score {value} at index {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
    #[error("label {value} at index {index} is not 0 or 1")]
    InvalidLabel { index: usize, value: u8 },
    #[error("AUC undefined for single-class labels")]
    SingleClass,
}

/// Borrowed, validated pair of score and label slices.
#[derive(Debug, Clone, Copy)]
pub struct ScoredSet<'a> {
    scores: &'a [f64],
    labels: &'a [u8],
}

impl<'a> ScoredSet<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [u8]) -> Result<Self, MetricsError> {
        if scores.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(MetricsError::Empty);
        }
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(MetricsError::ScoreOutOfRange { index, value });
        }
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, l)| **l > 1) {
            return Err(MetricsError::InvalidLabel { index, value });
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &'a [f64] {
        self.scores
    }

    pub fn labels(&self) -> &'a [u8] {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Pair counts behind an AUC value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AucCounts {
    /// Twice the number of concordant pairs plus the number of tied pairs.
    pub credit2: u64,
    pub positives: u64,
    pub negatives: u64,
}

impl AucCounts {
    pub fn auc(&self) -> f64 {
        debug_assert!(self.positives > 0 && self.negatives > 0);
        self.credit2 as f64 / (2 * self.positives * self.negatives) as f64
    }

    pub fn total_credit2(&self) -> u64 {
        2 * self.positives * self.negatives
    }
}

/// Tie-aware Mann-Whitney counts in O(n log n).
pub fn roc_auc_counts(set: &ScoredSet<'_>) -> Result<AucCounts, MetricsError> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_unstable_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));

    let mut credit2 = 0u64;
    let mut negatives_below = 0u64;
    let mut positives = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = set.scores[order[i]];
        let (mut group_pos, mut group_neg) = (0u64, 0u64);
        while i < order.len() && set.scores[order[i]] == score {
            if set.labels[order[i]] == 1 {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            i += 1;
        }
        credit2 += group_pos * (2 * negatives_below + group_neg);
        negatives_below += group_neg;
        positives += group_pos;
    }
    if positives == 0 || negatives_below == 0 {
        return Err(MetricsError::SingleClass);
    }
    Ok(AucCounts {
        credit2,
        positives,
        negatives: negatives_below,
    })
}

pub fn roc_auc(set: &ScoredSet<'_>) -> Result<f64, MetricsError> {
    roc_auc_counts(set).map(|c| c.auc())
}

/// Half-credit of one (positive, negative) score pair.
#[inline]
pub fn pair_credit2(positive: f64, negative: f64) -> u64 {
    match positive.partial_cmp(&negative) {
        Some(Ordering::Greater) => 2,
        Some(Ordering::Equal) => 1,
        _ => 0,
    }
}

/// Σ over `positives` × `negatives_sorted` of [`pair_credit2`].
/// `negatives_sorted` must be ascending.
pub fn cross_credit2<'a>(
    positives: impl IntoIterator<Item = &'a f64>,
    negatives_sorted: &[f64],
) -> u64 {
    positives
        .into_iter()
        .map(|&p| {
            let below = negatives_sorted.partition_point(|&n| n < p);
            let upto = negatives_sorted.partition_point(|&n| n <= p);
            2 * below as u64 + (upto - below) as u64
        })
        .sum()
}

/// Σ over `positives_sorted` × `negatives` of [`pair_credit2`].
/// `positives_sorted` must be ascending.
pub fn cross_credit2_rev<'a>(
    positives_sorted: &[f64],
    negatives: impl IntoIterator<Item = &'a f64>,
) -> u64 {
    let len = positives_sorted.len();
    negatives
        .into_iter()
        .map(|&n| {
            let upto = positives_sorted.partition_point(|&p| p <= n);
            let below = positives_sorted.partition_point(|&p| p < n);
            2 * (len - upto) as u64 + (upto - below) as u64
        })
        .sum()
}

fn predicted(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

pub fn accuracy(set: &ScoredSet<'_>, threshold: f64) -> f64 {
    let correct = set
        .scores
        .iter()
        .zip(set.labels)
        .filter(|(s, l)| predicted(**s, threshold) == **l)
        .count();
    correct as f64 / set.len() as f64
}

/// Confusion counts at a threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

pub fn confusion(set: &ScoredSet<'_>, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &l) in set.scores.iter().zip(set.labels) {
        match (predicted(s, threshold), l) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    c
}

/// F1 of the positive class; 0 when precision + recall is 0.
pub fn f1(set: &ScoredSet<'_>, threshold: f64) -> f64 {
    let c = confusion(set, threshold);
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
