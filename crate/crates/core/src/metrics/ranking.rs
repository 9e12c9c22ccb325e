use serde::{Deserialize, Serialize};

use super::ScoredSet;
use crate::error::{Error, Result};

/// Indices sorted by ascending score; ties keep index order.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Counts are accumulated as integers (doubled to absorb the halves), so the
/// result is exact up to the final division.
pub fn auc(set: &ScoredSet) -> Result<f64> {
    set.require_both_classes("AUC")?;
    let scores = set.scores();
    let labels = set.labels();
    let order = ascending(scores);
    let mut negatives_below: u64 = 0;
    let mut twice_correct: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_correct += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    let pairs = set.positives() as u64 * set.negatives() as u64;
    Ok(twice_correct as f64 / (2 * pairs) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; `+inf` for the origin.
    pub threshold: f64,
}

/// ROC points with one threshold per distinct score, from (0,0) to (1,1).
pub fn roc_curve(set: &ScoredSet) -> Result<Vec<RocPoint>> {
    set.require_both_classes("ROC curve")?;
    let scores = set.scores();
    let labels = set.labels();
    let mut order = ascending(scores);
    order.reverse();
    let (m, n) = (set.positives() as f64, set.negatives() as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / n, tpr: tp as f64 / m, threshold: s });
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Mean of precision@k over the ranks k of the positives, ranking by score
/// descending with ties broken by ascending original index.
pub fn average_precision(set: &ScoredSet) -> Result<f64> {
    let m = set.positives();
    if m == 0 {
        return Err(Error::UndefinedMetric("average precision needs at least one positive".into()));
    }
    let scores = set.scores();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if set.labels()[i] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / m as f64)
}
