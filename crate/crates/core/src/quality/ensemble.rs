//! Ridge-regression ensemble over quality features, with an average
//! baseline, early-prediction curves, and prediction from tagged labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::{Dimension, LabeledDialogue};
use crate::crf::{decode_dialogue, plan_folds, CrfModel};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{rmse_mae, RmseMae};
use crate::quality::features::{build_quality_features, Augmentation, QualityVocab};
use crate::quality::ridge::fit_ridge;
use crate::scalar::Real;

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// One fold's fitted regressor, sparse over feature ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMember<R> {
    pub weights: BTreeMap<u64, R>,
    pub intercept: R,
}

impl<R: Real> QualityMember<R> {
    /// Raw member prediction, deliberately unclamped.
    pub fn predict(&self, features: &BTreeMap<u64, R>) -> R {
        let mut y = self.intercept;
        for (id, &value) in features {
            if let Some(&w) = self.weights.get(id) {
                y = y + w * value;
            }
        }
        y
    }
}

/// Ten ridge regressors plus the vocabulary and augmentation they were
/// trained with. The ensemble prediction is the plain mean of the member
/// predictions, clamped once to `[1, 5]` at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityEnsemble<R> {
    pub version: u32,
    pub augmentation: Augmentation,
    pub lambda: R,
    pub min_frequency: usize,
    pub vocab: Vec<String>,
    pub members: Vec<QualityMember<R>>,
}

/// Quality-model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityHyper<R> {
    pub lambda: R,
    pub folds: usize,
    pub min_frequency: usize,
    pub seed: u64,
}

impl<R: Real> QualityHyper<R> {
    pub fn new(seed: u64) -> Self {
        QualityHyper {
            lambda: R::one(),
            folds: 10,
            min_frequency: 5,
            seed,
        }
    }
}

/// Fit one member per fold, each on the other folds' dialogues.
///
/// Folds are grouped by topic question; the text vocabulary is fixed once
/// from the full training input.
pub fn train_quality<'a, R: Real>(
    train: impl IntoIterator<Item = &'a LabeledDialogue>,
    augmentation: Augmentation,
    hyper: &QualityHyper<R>,
) -> Result<QualityEnsemble<R>> {
    let dialogues: Vec<&LabeledDialogue> = train.into_iter().collect();
    if dialogues.is_empty() {
        return Err(Error::EmptyInput("no training dialogues".into()));
    }
    let plan = plan_folds(dialogues.iter().copied(), hyper.folds, hyper.seed)?;
    let vocab = QualityVocab::build(dialogues.iter().copied(), hyper.min_frequency);

    let features: Vec<BTreeMap<u64, R>> = dialogues
        .iter()
        .map(|d| Ok(build_quality_features(d, augmentation, 1.0, &vocab)?.features))
        .collect::<Result<_>>()?;
    let columns: BTreeMap<u64, usize> = {
        let ids: BTreeSet<u64> = features.iter().flat_map(|f| f.keys().copied()).collect();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let dense: Vec<Vec<R>> = features
        .iter()
        .map(|f| {
            let mut row = vec![R::zero(); columns.len()];
            for (id, &value) in f {
                row[columns[id]] = value;
            }
            row
        })
        .collect();
    let targets: Vec<R> = dialogues
        .iter()
        .map(|d| R::from_usize_lossy(d.quality.value() as usize))
        .collect();

    let mut members = Vec::with_capacity(plan.folds.len());
    for fold in &plan.folds {
        let held_out: BTreeSet<&str> = fold.iter().map(String::as_str).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, d) in dialogues.iter().enumerate() {
            if !held_out.contains(d.dialogue_id.as_str()) {
                x.push(dense[i].clone());
                y.push(targets[i]);
            }
        }
        let fit = fit_ridge(&x, &y, hyper.lambda)?;
        let weights: BTreeMap<u64, R> = columns
            .iter()
            .map(|(&id, &col)| (id, fit.weights[col]))
            .filter(|(_, w)| *w != R::zero())
            .collect();
        members.push(QualityMember {
            weights,
            intercept: fit.intercept,
        });
    }

    Ok(QualityEnsemble {
        version: ENSEMBLE_FORMAT_VERSION,
        augmentation,
        lambda: hyper.lambda,
        min_frequency: hyper.min_frequency,
        vocab: vocab.tokens.into_iter().collect(),
        members,
    })
}

impl<R: Real> QualityEnsemble<R> {
    fn vocab_set(&self) -> QualityVocab {
        QualityVocab {
            tokens: self.vocab.iter().cloned().collect(),
            min_frequency: self.min_frequency,
        }
    }

    /// Mean of the raw member predictions, clamped once to `[1, 5]`.
    pub fn predict(&self, dialogue: &LabeledDialogue, p: f64) -> Result<R> {
        let features =
            build_quality_features(dialogue, self.augmentation, p, &self.vocab_set())?.features;
        let total: R = self.members.iter().map(|m| m.predict(&features)).sum();
        let mean = total / R::from_usize_lossy(self.members.len());
        Ok(clamp_score(mean))
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
        let ensemble: QualityEnsemble<R> = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ensemble.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                got: ensemble.version,
                expected: ENSEMBLE_FORMAT_VERSION,
            });
        }
        Ok(ensemble)
    }
}

fn clamp_score<R: Real>(value: R) -> R {
    value.max(R::one()).min(R::from_f64_lossy(5.0))
}

/// Always predicts the mean training quality score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselinePredictor<R> {
    pub constant: R,
}

impl<R: Real> BaselinePredictor<R> {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a LabeledDialogue>) -> Result<Self> {
        let scores: Vec<R> = train
            .into_iter()
            .map(|d| R::from_usize_lossy(d.quality.value() as usize))
            .collect();
        if scores.is_empty() {
            return Err(Error::EmptyInput("no training dialogues".into()));
        }
        let n = R::from_usize_lossy(scores.len());
        Ok(BaselinePredictor {
            constant: scores.iter().cloned().sum::<R>() / n,
        })
    }

    pub fn predict(&self) -> R {
        self.constant
    }
}

/// Gold quality scores as reals, aligned with the dialogues.
pub fn gold_scores<'a, R: Real>(
    dialogues: impl IntoIterator<Item = &'a LabeledDialogue>,
) -> Vec<R> {
    dialogues
        .into_iter()
        .map(|d| R::from_usize_lossy(d.quality.value() as usize))
        .collect()
}

/// RMSE and MAE of aligned predictions; this is the shared metrics
/// implementation, re-exported under the task's name.
pub fn evaluate_quality<R: Real>(pred: &[R], gold: &[R]) -> Result<RmseMae<R>> {
    rmse_mae(pred, gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyPoint<R> {
    pub percentage: u32,
    pub rmse: R,
}

/// RMSE when only the first `ceil(p * n)` turns are visible, for each
/// percentage. 100% reproduces the full evaluation exactly.
pub fn early_prediction_curve<R: Real>(
    ensemble: &QualityEnsemble<R>,
    test: &[&LabeledDialogue],
    percentages: &[u32],
) -> Result<Vec<EarlyPoint<R>>> {
    if percentages.is_empty() {
        return Err(Error::InvalidParameter {
            name: "percentages",
            reason: "need at least one percentage".to_string(),
        });
    }
    let gold: Vec<R> = gold_scores(test.iter().copied());
    let mut points = Vec::with_capacity(percentages.len());
    for &percentage in percentages {
        if percentage == 0 || percentage > 100 {
            return Err(Error::InvalidParameter {
                name: "percentages",
                reason: format!("percentage {percentage} outside 1..=100"),
            });
        }
        let p = percentage as f64 / 100.0;
        let pred: Vec<R> = test
            .iter()
            .map(|d| ensemble.predict(d, p))
            .collect::<Result<_>>()?;
        points.push(EarlyPoint {
            percentage,
            rmse: rmse_mae(&pred, &gold)?.rmse,
        });
    }
    Ok(points)
}

/// Replace the labels the augmentation needs with tagger predictions, then
/// predict quality.
pub fn predict_with_predicted_labels<R: Real>(
    ensemble: &QualityEnsemble<R>,
    dialogue: &LabeledDialogue,
    taggers: &BTreeMap<Dimension, CrfModel<R>>,
) -> Result<R> {
    let mut tagged = dialogue.clone();
    for &dimension in ensemble.augmentation.dimensions() {
        let tagger = taggers
            .get(&dimension)
            .ok_or_else(|| Error::MissingTagger {
                dimension: dimension.as_str().to_string(),
            })?;
        if tagger.dimension != dimension {
            return Err(Error::InvalidParameter {
                name: "taggers",
                reason: format!("model for {} offered under {}", tagger.dimension, dimension),
            });
        }
        let predicted = decode_dialogue(tagger, &dialogue.turns)?;
        tagged.turns = tagged
            .turns
            .iter()
            .zip(&predicted)
            .map(|(turn, &label)| turn.with_label_index(dimension, label))
            .collect();
    }
    ensemble.predict(&tagged, 1.0)
}
