//! Ranking metrics for binary purchase prediction.

mod delong;
mod ranking;

use serde::{Deserialize, Serialize};

pub use delong::{delong_test, normal_cdf, structural_components, DeLongResult};
pub use ranking::{auc, average_precision, roc_curve, trapezoid_area, RocPoint};

use crate::error::{Error, Result};

/// Scores paired with binary labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("scores".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn from_f64_labels(scores: Vec<f64>, labels: &[f64]) -> Result<Self> {
        Self::new(scores, labels.iter().map(|&y| y > 0.5).collect())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn prevalence(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }

    pub(crate) fn require_both_classes(&self, what: &str) -> Result<()> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(Error::UndefinedMetric(format!(
                "{what} needs both classes ({} positives, {} negatives)",
                self.positives(),
                self.negatives()
            )));
        }
        Ok(())
    }

    /// Subset by index.
    pub fn select(&self, idx: &[usize]) -> ScoredSet {
        ScoredSet { scores: idx.iter().map(|&i| self.scores[i]).collect(), labels: idx.iter().map(|&i| self.labels[i]).collect() }
    }
}
