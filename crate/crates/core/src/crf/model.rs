//! Linear-chain CRF: scoring, log-partition, forward-backward gradients,
//! and Viterbi decoding.
//!
//! A sequence is scored as
//! `start[y1] + sum_t emit_t(y_t) + sum_t trans[y_t][y_{t+1}] + stop[y_n]`,
//! where the emission score is a sparse dot product between the turn's
//! feature vector and the per-label emission weights.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::Dimension;
use crate::crf::features::FeatureVector;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::scalar::{log_sum_exp, Real};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel<R> {
    pub version: u32,
    pub dimension: Dimension,
    /// Canonical label codes, fixing the label order.
    pub labels: Vec<String>,
    pub lambda: R,
    pub start: Vec<R>,
    pub stop: Vec<R>,
    /// `transition[from][to]`.
    pub transition: Vec<Vec<R>>,
    /// feature id -> one weight per label.
    pub emission: BTreeMap<u64, Vec<R>>,
}

impl<R: Real> CrfModel<R> {
    pub fn new(dimension: Dimension, lambda: R) -> Self {
        let label_count = dimension.label_count();
        CrfModel {
            version: MODEL_FORMAT_VERSION,
            dimension,
            labels: dimension.codes(),
            lambda,
            start: vec![R::zero(); label_count],
            stop: vec![R::zero(); label_count],
            transition: vec![vec![R::zero(); label_count]; label_count],
            emission: BTreeMap::new(),
        }
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Emission scores for one feature vector, one per label.
    pub fn emission_scores(&self, fv: &FeatureVector<R>) -> Vec<R> {
        let mut scores = vec![R::zero(); self.label_count()];
        for (id, &value) in fv.iter() {
            if let Some(weights) = self.emission.get(id) {
                for (score, &w) in scores.iter_mut().zip(weights) {
                    *score = *score + w * value;
                }
            }
        }
        scores
    }

    /// Per-turn emission scores for a sequence, validated finite.
    fn node_scores(&self, sequence: &[FeatureVector<R>]) -> Result<Vec<Vec<R>>> {
        if sequence.is_empty() {
            return Err(Error::EmptyInput("empty feature sequence".into()));
        }
        let scores: Vec<Vec<R>> = sequence.iter().map(|fv| self.emission_scores(fv)).collect();
        let finite = scores.iter().flatten().all(|s| s.is_finite())
            && self.start.iter().all(|s| s.is_finite())
            && self.stop.iter().all(|s| s.is_finite())
            && self.transition.iter().flatten().all(|s| s.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                what: "CRF score".to_string(),
            });
        }
        Ok(scores)
    }

    /// Score of one labeling under the model.
    pub fn sequence_score(&self, sequence: &[FeatureVector<R>], labels: &[usize]) -> Result<R> {
        let node = self.node_scores(sequence)?;
        assert_eq!(
            sequence.len(),
            labels.len(),
            "labels must align with the sequence"
        );
        let mut score = self.start[labels[0]] + node[0][labels[0]];
        for t in 1..labels.len() {
            score = score + self.transition[labels[t - 1]][labels[t]] + node[t][labels[t]];
        }
        Ok(score + self.stop[labels[labels.len() - 1]])
    }

    /// Log of the partition function via the log-space forward recursion.
    pub fn log_partition(&self, sequence: &[FeatureVector<R>]) -> Result<R> {
        let node = self.node_scores(sequence)?;
        let alpha = self.forward(&node);
        let last = alpha.last().expect("nonempty sequence");
        let terms: Vec<R> = last.iter().zip(&self.stop).map(|(&a, &s)| a + s).collect();
        Ok(log_sum_exp(&terms))
    }

    fn forward(&self, node: &[Vec<R>]) -> Vec<Vec<R>> {
        let label_count = self.label_count();
        let mut alpha = Vec::with_capacity(node.len());
        let first: Vec<R> = (0..label_count)
            .map(|y| self.start[y] + node[0][y])
            .collect();
        alpha.push(first);
        for t in 1..node.len() {
            let prev = &alpha[t - 1];
            let row: Vec<R> = (0..label_count)
                .map(|y_next| {
                    let terms: Vec<R> = (0..label_count)
                        .map(|y| prev[y] + self.transition[y][y_next])
                        .collect();
                    log_sum_exp(&terms) + node[t][y_next]
                })
                .collect();
            alpha.push(row);
        }
        alpha
    }

    fn backward(&self, node: &[Vec<R>]) -> Vec<Vec<R>> {
        let label_count = self.label_count();
        let n = node.len();
        let mut beta = vec![vec![R::zero(); label_count]; n];
        beta[n - 1] = self.stop.clone();
        for t in (0..n - 1).rev() {
            for y in 0..label_count {
                let terms: Vec<R> = (0..label_count)
                    .map(|y_next| {
                        self.transition[y][y_next] + node[t + 1][y_next] + beta[t + 1][y_next]
                    })
                    .collect();
                beta[t][y] = log_sum_exp(&terms);
            }
        }
        beta
    }

    /// Per-position label marginals; each row sums to 1.
    pub fn marginals(&self, sequence: &[FeatureVector<R>]) -> Result<Vec<Vec<R>>> {
        let node = self.node_scores(sequence)?;
        let alpha = self.forward(&node);
        let beta = self.backward(&node);
        let last = alpha.last().expect("nonempty sequence");
        let terms: Vec<R> = last.iter().zip(&self.stop).map(|(&a, &s)| a + s).collect();
        let log_z = log_sum_exp(&terms);
        Ok(alpha
            .iter()
            .zip(&beta)
            .map(|(a_row, b_row)| {
                a_row
                    .iter()
                    .zip(b_row)
                    .map(|(&a, &b)| (a + b - log_z).exp())
                    .collect()
            })
            .collect())
    }

    /// Regularized negative log-likelihood and its full gradient.
    ///
    /// `NLL = log Z - score(gold) + (lambda/2) * ||w||^2` over every weight
    /// in the model; the gradient is expected minus observed feature counts
    /// plus `lambda * w`.
    pub fn nll_and_gradient(
        &self,
        sequence: &[FeatureVector<R>],
        gold: &[usize],
    ) -> Result<(R, CrfGradient<R>)> {
        let label_count = self.label_count();
        if gold.len() != sequence.len() {
            return Err(Error::LengthMismatch {
                pred: gold.len(),
                gold: sequence.len(),
            });
        }
        if gold.iter().any(|&y| y >= label_count) {
            return Err(Error::InvalidParameter {
                name: "gold",
                reason: "label index out of range".to_string(),
            });
        }
        let node = self.node_scores(sequence)?;
        let alpha = self.forward(&node);
        let beta = self.backward(&node);
        let last = alpha.last().expect("nonempty sequence");
        let terms: Vec<R> = last.iter().zip(&self.stop).map(|(&a, &s)| a + s).collect();
        let log_z = log_sum_exp(&terms);

        let mut grad = self.expected_minus_observed(sequence, gold, &node, &alpha, &beta, log_z);
        // L2 term: lambda * w on every model weight, and (lambda/2)||w||^2
        // added to the loss.
        let mut norm_sq = R::zero();
        for (y, &w) in self.start.iter().enumerate() {
            grad.start[y] = grad.start[y] + self.lambda * w;
            norm_sq = norm_sq + w * w;
        }
        for (y, &w) in self.stop.iter().enumerate() {
            grad.stop[y] = grad.stop[y] + self.lambda * w;
            norm_sq = norm_sq + w * w;
        }
        for (from, row) in self.transition.iter().enumerate() {
            for (to, &w) in row.iter().enumerate() {
                grad.transition[from][to] = grad.transition[from][to] + self.lambda * w;
                norm_sq = norm_sq + w * w;
            }
        }
        for (id, weights) in &self.emission {
            let entry = grad
                .emission
                .entry(*id)
                .or_insert_with(|| vec![R::zero(); label_count]);
            for (g, &w) in entry.iter_mut().zip(weights) {
                *g = *g + self.lambda * w;
                norm_sq = norm_sq + w * w;
            }
        }

        let gold_score = {
            let mut score = self.start[gold[0]] + node[0][gold[0]];
            for t in 1..gold.len() {
                score = score + self.transition[gold[t - 1]][gold[t]] + node[t][gold[t]];
            }
            score + self.stop[gold[gold.len() - 1]]
        };
        let nll = log_z - gold_score + self.lambda / R::from_f64_lossy(2.0) * norm_sq;
        Ok((nll, grad))
    }

    /// Data-term gradient: expected feature counts minus observed ones.
    /// Used directly by the trainer, which handles regularization with a
    /// proximal step instead.
    pub(crate) fn data_gradient(
        &self,
        sequence: &[FeatureVector<R>],
        gold: &[usize],
    ) -> Result<CrfGradient<R>> {
        let node = self.node_scores(sequence)?;
        let alpha = self.forward(&node);
        let beta = self.backward(&node);
        let last = alpha.last().expect("nonempty sequence");
        let terms: Vec<R> = last.iter().zip(&self.stop).map(|(&a, &s)| a + s).collect();
        let log_z = log_sum_exp(&terms);
        Ok(self.expected_minus_observed(sequence, gold, &node, &alpha, &beta, log_z))
    }

    #[allow(clippy::needless_range_loop)]
    fn expected_minus_observed(
        &self,
        sequence: &[FeatureVector<R>],
        gold: &[usize],
        node: &[Vec<R>],
        alpha: &[Vec<R>],
        beta: &[Vec<R>],
        log_z: R,
    ) -> CrfGradient<R> {
        let label_count = self.label_count();
        let n = sequence.len();
        let mut grad = CrfGradient::zeros(label_count);

        // Node marginals drive start/stop/emission expectations.
        for t in 0..n {
            for y in 0..label_count {
                let marginal = (alpha[t][y] + beta[t][y] - log_z).exp();
                let observed = if gold[t] == y { R::one() } else { R::zero() };
                let diff = marginal - observed;
                if t == 0 {
                    grad.start[y] = grad.start[y] + diff;
                }
                if t == n - 1 {
                    grad.stop[y] = grad.stop[y] + diff;
                }
                if diff != R::zero() {
                    for (&id, &value) in sequence[t].iter() {
                        let entry = grad
                            .emission
                            .entry(id)
                            .or_insert_with(|| vec![R::zero(); label_count]);
                        entry[y] = entry[y] + diff * value;
                    }
                }
            }
        }

        // Edge marginals drive transition expectations.
        for t in 0..n.saturating_sub(1) {
            for from in 0..label_count {
                for to in 0..label_count {
                    let joint = (alpha[t][from]
                        + self.transition[from][to]
                        + node[t + 1][to]
                        + beta[t + 1][to]
                        - log_z)
                        .exp();
                    let observed = if gold[t] == from && gold[t + 1] == to {
                        R::one()
                    } else {
                        R::zero()
                    };
                    grad.transition[from][to] = grad.transition[from][to] + joint - observed;
                }
            }
        }
        grad
    }

    /// Highest-scoring label sequence; ties break toward the lowest label
    /// index along the backtrace.
    #[allow(clippy::needless_range_loop)]
    pub fn viterbi_decode(&self, sequence: &[FeatureVector<R>]) -> Result<Vec<usize>> {
        let node = self.node_scores(sequence)?;
        let label_count = self.label_count();
        let n = node.len();
        let mut delta: Vec<Vec<R>> = Vec::with_capacity(n);
        let mut backpointer: Vec<Vec<usize>> = Vec::with_capacity(n);
        delta.push(
            (0..label_count)
                .map(|y| self.start[y] + node[0][y])
                .collect(),
        );
        backpointer.push(vec![0; label_count]);
        for t in 1..n {
            let mut row = Vec::with_capacity(label_count);
            let mut pointers = Vec::with_capacity(label_count);
            for y_next in 0..label_count {
                let mut best = 0usize;
                let mut best_score = delta[t - 1][0] + self.transition[0][y_next];
                for y in 1..label_count {
                    let score = delta[t - 1][y] + self.transition[y][y_next];
                    if score > best_score {
                        best_score = score;
                        best = y;
                    }
                }
                row.push(best_score + node[t][y_next]);
                pointers.push(best);
            }
            delta.push(row);
            backpointer.push(pointers);
        }
        let mut best = 0usize;
        let mut best_score = delta[n - 1][0] + self.stop[0];
        for y in 1..label_count {
            let score = delta[n - 1][y] + self.stop[y];
            if score > best_score {
                best_score = score;
                best = y;
            }
        }
        let mut path = vec![best; n];
        for t in (1..n).rev() {
            path[t - 1] = backpointer[t][path[t]];
        }
        Ok(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |out| {
            serde_json::to_writer(&mut *out, self)?;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let model: CrfModel<R> = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                got: model.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

/// Gradient with the same shape as the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient<R> {
    pub start: Vec<R>,
    pub stop: Vec<R>,
    pub transition: Vec<Vec<R>>,
    pub emission: BTreeMap<u64, Vec<R>>,
}

impl<R: Real> CrfGradient<R> {
    pub fn zeros(label_count: usize) -> Self {
        CrfGradient {
            start: vec![R::zero(); label_count],
            stop: vec![R::zero(); label_count],
            transition: vec![vec![R::zero(); label_count]; label_count],
            emission: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, other: &CrfGradient<R>) {
        for (a, &b) in self.start.iter_mut().zip(&other.start) {
            *a = *a + b;
        }
        for (a, &b) in self.stop.iter_mut().zip(&other.stop) {
            *a = *a + b;
        }
        for (row_a, row_b) in self.transition.iter_mut().zip(&other.transition) {
            for (a, &b) in row_a.iter_mut().zip(row_b) {
                *a = *a + b;
            }
        }
        let label_count = self.start.len();
        for (id, weights) in &other.emission {
            let entry = self
                .emission
                .entry(*id)
                .or_insert_with(|| vec![R::zero(); label_count]);
            for (a, &b) in entry.iter_mut().zip(weights) {
                *a = *a + b;
            }
        }
    }
}
