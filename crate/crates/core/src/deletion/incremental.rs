//! AUC of a corpus whose scores changed on a small subset of documents,
//! without re-sorting the whole corpus.

use crate::metrics::{
    cross_credit2, cross_credit2_rev, roc_auc_counts, AucCounts, MetricsError, ScoredSet,
};

/// Baseline per-document scores plus the sorted per-class score lists
/// needed to update pair credits in O(|changed| log n).
#[derive(Debug, Clone)]
pub struct AucState {
    scores: Vec<f64>,
    labels: Vec<u8>,
    positives_sorted: Vec<f64>,
    negatives_sorted: Vec<f64>,
    counts: AucCounts,
}

impl AucState {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self, MetricsError> {
        let counts = roc_auc_counts(&ScoredSet::new(&scores, &labels)?)?;
        let mut positives_sorted = Vec::with_capacity(counts.positives as usize);
        let mut negatives_sorted = Vec::with_capacity(counts.negatives as usize);
        for (&s, &l) in scores.iter().zip(&labels) {
            if l == 1 {
                positives_sorted.push(s);
            } else {
                negatives_sorted.push(s);
            }
        }
        positives_sorted.sort_unstable_by(f64::total_cmp);
        negatives_sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self {
            scores,
            labels,
            positives_sorted,
            negatives_sorted,
            counts,
        })
    }

    pub fn counts(&self) -> AucCounts {
        self.counts
    }

    pub fn auc(&self) -> f64 {
        self.counts.auc()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Pair counts after replacing `scores[docs[i]]` with `new_scores[i]`.
    /// `docs` must be distinct.
    pub fn counts_with(&self, docs: &[u32], new_scores: &[f64]) -> AucCounts {
        debug_assert_eq!(docs.len(), new_scores.len());
        let mut old_pos = Vec::new();
        let mut old_neg = Vec::new();
        let mut new_pos = Vec::new();
        let mut new_neg = Vec::new();
        for (&d, &s) in docs.iter().zip(new_scores) {
            let d = d as usize;
            if self.labels[d] == 1 {
                old_pos.push(self.scores[d]);
                new_pos.push(s);
            } else {
                old_neg.push(self.scores[d]);
                new_neg.push(s);
            }
        }
        old_neg.sort_unstable_by(f64::total_cmp);
        new_neg.sort_unstable_by(f64::total_cmp);

        // Pairs touching the changed set under the old scores.
        let removed = cross_credit2(&old_pos, &self.negatives_sorted)
            + cross_credit2_rev(&self.positives_sorted, &old_neg)
            - cross_credit2(&old_pos, &old_neg);
        // The same pairs under the new scores; unchanged documents keep their
        // old score.
        let added = cross_credit2(&new_pos, &self.negatives_sorted)
            - cross_credit2(&new_pos, &old_neg)
            + cross_credit2(&new_pos, &new_neg)
            + cross_credit2_rev(&self.positives_sorted, &new_neg)
            - cross_credit2(&old_pos, &new_neg);

        AucCounts {
            credit2: self.counts.credit2 + added - removed,
            ..self.counts
        }
    }
}
