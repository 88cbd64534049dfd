//! Shared evaluation metrics: macro-F1 over confusion matrices, RMSE and MAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square confusion matrix; rows are gold labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    pub fn count(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    /// Merge another matrix over the same label set into this one.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.labels, other.labels, "label sets must match");
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn true_positives(&self, l: usize) -> u64 {
        self.counts[l][l]
    }

    fn false_positives(&self, l: usize) -> u64 {
        (0..self.labels.len())
            .filter(|&g| g != l)
            .map(|g| self.counts[g][l])
            .sum()
    }

    fn false_negatives(&self, l: usize) -> u64 {
        (0..self.labels.len())
            .filter(|&p| p != l)
            .map(|p| self.counts[l][p])
            .sum()
    }

    /// Build from aligned gold/prediction index sequences.
    pub fn from_pairs(labels: Vec<String>, pairs: &[(usize, usize)]) -> Self {
        let mut cm = ConfusionMatrix::new(labels);
        for &(g, p) in pairs {
            cm.add(g, p);
        }
        cm
    }
}

/// Per-label F1 scores plus their unweighted mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacroF1<R> {
    pub per_label_f1: Vec<R>,
    pub macro_f1: R,
}

/// Macro-averaged F1 over the full label set.
///
/// Precision and recall with a zero denominator are taken as 0, so a label
/// that never occurs contributes an F1 of 0 to the mean. This keeps scores
/// comparable across folds with absent labels.
pub fn macro_f1<R: Real>(cm: &ConfusionMatrix) -> Result<MacroF1<R>> {
    if cm.labels.is_empty() || cm.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix has no counts".into()));
    }
    let per_label_f1: Vec<R> = (0..cm.labels.len())
        .map(|l| {
            let tp = R::from_usize_lossy(cm.true_positives(l) as usize);
            let fp = R::from_usize_lossy(cm.false_positives(l) as usize);
            let fn_ = R::from_usize_lossy(cm.false_negatives(l) as usize);
            let precision = if (tp + fp) > R::zero() {
                tp / (tp + fp)
            } else {
                R::zero()
            };
            let recall = if (tp + fn_) > R::zero() {
                tp / (tp + fn_)
            } else {
                R::zero()
            };
            if precision + recall > R::zero() {
                R::from_f64_lossy(2.0) * precision * recall / (precision + recall)
            } else {
                R::zero()
            }
        })
        .collect();
    let macro_f1 =
        per_label_f1.iter().cloned().sum::<R>() / R::from_usize_lossy(per_label_f1.len());
    Ok(MacroF1 {
        per_label_f1,
        macro_f1,
    })
}

/// Root mean squared error and mean absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseMae<R> {
    pub rmse: R,
    pub mae: R,
}

pub fn rmse_mae<R: Real>(pred: &[R], gold: &[R]) -> Result<RmseMae<R>> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    let n = R::from_usize_lossy(pred.len());
    let mut sq = R::zero();
    let mut abs = R::zero();
    for (&p, &g) in pred.iter().zip(gold) {
        let d = p - g;
        sq = sq + d * d;
        abs = abs + d.abs();
    }
    Ok(RmseMae {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
    })
}
