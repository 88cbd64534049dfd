//! CRF training by mini-batch gradient descent, topic-grouped fold
//! planning, and cross-validated evaluation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{Dimension, LabeledCorpus, LabeledDialogue};
use crate::crf::features::{extract_sequence_features, FeatureVector, TurnText};
use crate::crf::model::{CrfGradient, CrfModel};
use crate::error::{Error, Result};
use crate::metrics::{macro_f1, ConfusionMatrix, MacroF1};
use crate::scalar::Real;

/// Training hyperparameters; the seed drives batch shuffling and must be
/// set for reproducible models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggerHyper<R> {
    pub lambda: R,
    pub epochs: usize,
    /// Base step size, decayed by `1/sqrt(epoch)`.
    pub step_size: R,
    /// Batch size in dialogues.
    pub batch_size: usize,
    pub seed: u64,
    /// With transitions off the model degenerates to an independent
    /// per-turn classifier; start/stop/transition weights stay zero.
    pub use_transitions: bool,
}

impl<R: Real> TaggerHyper<R> {
    pub fn new(seed: u64) -> Self {
        TaggerHyper {
            lambda: R::from_f64_lossy(0.1),
            epochs: 30,
            step_size: R::from_f64_lossy(0.1),
            batch_size: 8,
            seed,
            use_transitions: true,
        }
    }
}

struct Instance<R> {
    features: Vec<FeatureVector<R>>,
    gold: Vec<usize>,
}

fn build_instances<'a, R: Real>(
    dialogues: impl IntoIterator<Item = &'a LabeledDialogue>,
    dimension: Dimension,
) -> Vec<Instance<R>> {
    dialogues
        .into_iter()
        .map(|d| Instance {
            features: extract_sequence_features(&d.turns),
            gold: d.turns.iter().map(|t| t.label_index(dimension)).collect(),
        })
        .collect()
}

/// Train a CRF tagger on the given dialogues.
///
/// Mini-batch gradient descent on the summed negative log-likelihood. The
/// data term takes plain gradient steps; the L2 term is applied as a
/// proximal shrink `w / (1 + lr * batch * lambda)` per batch, which keeps
/// the update stable for arbitrarily large `lambda`. Training aborts if the
/// epoch loss rises five epochs in a row.
pub fn train_tagger<'a, R: Real>(
    dialogues: impl IntoIterator<Item = &'a LabeledDialogue>,
    dimension: Dimension,
    hyper: &TaggerHyper<R>,
) -> Result<CrfModel<R>> {
    let instances: Vec<Instance<R>> = build_instances(dialogues, dimension);
    if instances.is_empty() {
        return Err(Error::EmptyInput("no dialogues to train on".into()));
    }
    let mut model = CrfModel::new(dimension, hyper.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let batch_size = hyper.batch_size.max(1);

    let mut guard = DivergenceGuard::new(5);
    for epoch in 1..=hyper.epochs {
        let lr = hyper.step_size / R::from_usize_lossy(epoch).sqrt();
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad = CrfGradient::zeros(model.label_count());
            for &idx in batch {
                let instance = &instances[idx];
                grad.add(&model.data_gradient(&instance.features, &instance.gold)?);
            }
            apply_update(&mut model, &grad, lr, batch.len(), hyper);
        }
        guard.observe(summed_nll(&model, &instances)?)?;
    }
    Ok(model)
}

/// Aborts training when the epoch loss rises `limit` epochs in a row; a
/// non-finite loss counts as rising.
struct DivergenceGuard<R> {
    previous: R,
    rising: usize,
    limit: usize,
}

impl<R: Real> DivergenceGuard<R> {
    fn new(limit: usize) -> Self {
        DivergenceGuard {
            previous: R::infinity(),
            rising: 0,
            limit,
        }
    }

    fn observe(&mut self, loss: R) -> Result<()> {
        if !loss.is_finite() || loss > self.previous {
            self.rising += 1;
            if self.rising >= self.limit {
                return Err(Error::Diverged {
                    epochs: self.rising,
                });
            }
        } else {
            self.rising = 0;
        }
        self.previous = loss;
        Ok(())
    }
}

fn apply_update<R: Real>(
    model: &mut CrfModel<R>,
    grad: &CrfGradient<R>,
    lr: R,
    batch_len: usize,
    hyper: &TaggerHyper<R>,
) {
    let shrink = R::one() / (R::one() + lr * R::from_usize_lossy(batch_len) * hyper.lambda);
    let label_count = model.label_count();
    for (id, g) in &grad.emission {
        let weights = model
            .emission
            .entry(*id)
            .or_insert_with(|| vec![R::zero(); label_count]);
        for (w, &gv) in weights.iter_mut().zip(g) {
            *w = *w - lr * gv;
        }
    }
    for weights in model.emission.values_mut() {
        for w in weights.iter_mut() {
            *w = *w * shrink;
        }
    }
    if hyper.use_transitions {
        for (w, &g) in model.start.iter_mut().zip(&grad.start) {
            *w = (*w - lr * g) * shrink;
        }
        for (w, &g) in model.stop.iter_mut().zip(&grad.stop) {
            *w = (*w - lr * g) * shrink;
        }
        for (row, g_row) in model.transition.iter_mut().zip(&grad.transition) {
            for (w, &g) in row.iter_mut().zip(g_row) {
                *w = (*w - lr * g) * shrink;
            }
        }
    }
}

/// Summed NLL over the instances, including the per-instance L2 term.
fn summed_nll<R: Real>(model: &CrfModel<R>, instances: &[Instance<R>]) -> Result<R> {
    let mut total = R::zero();
    for instance in instances {
        let (nll, _) = model.nll_and_gradient(&instance.features, &instance.gold)?;
        total = total + nll;
    }
    Ok(total)
}

/// Decode one dialogue's turn labels.
pub fn decode_dialogue<R: Real, T: TurnText>(
    model: &CrfModel<R>,
    turns: &[T],
) -> Result<Vec<usize>> {
    model.viterbi_decode(&extract_sequence_features(turns))
}

/// Disjoint dialogue-id folds; no topic question spans two folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
}

/// Group dialogues by topic, shuffle the topics with the seed, and deal
/// each topic to the currently smallest fold.
pub fn plan_folds<'a>(
    dialogues: impl IntoIterator<Item = &'a LabeledDialogue>,
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "need at least 2 folds".to_string(),
        });
    }
    let mut by_topic: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for d in dialogues {
        by_topic
            .entry(d.topic_question.as_str())
            .or_default()
            .push(d.dialogue_id.as_str());
    }
    if by_topic.len() < k {
        return Err(Error::NotEnoughTopics {
            needed: k,
            got: by_topic.len(),
        });
    }
    let mut topics: Vec<&str> = by_topic.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    topics.shuffle(&mut rng);

    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for topic in topics {
        let smallest = (0..k).min_by_key(|&f| (folds[f].len(), f)).expect("k >= 2");
        folds[smallest].extend(by_topic[topic].iter().map(|s| s.to_string()));
    }
    for fold in &mut folds {
        fold.sort();
    }
    Ok(FoldPlan { folds })
}

/// Cross-validated tagger quality: per-label F1 and their macro average,
/// pooled over the fold confusion matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggerEvaluation<R> {
    pub dimension: Dimension,
    pub confusion: ConfusionMatrix,
    pub per_label_f1: Vec<R>,
    pub macro_f1: R,
}

/// For each fold: train on the remaining dialogues, decode the fold, and
/// accumulate one confusion matrix over everything.
pub fn evaluate_tagger<R: Real>(
    corpus: &LabeledCorpus,
    dimension: Dimension,
    folds: &FoldPlan,
    hyper: &TaggerHyper<R>,
) -> Result<TaggerEvaluation<R>> {
    let by_id: BTreeMap<&str, &LabeledDialogue> = corpus
        .dialogues
        .iter()
        .map(|d| (d.dialogue_id.as_str(), d))
        .collect();
    let mut covered: BTreeSet<&str> = BTreeSet::new();
    for fold in &folds.folds {
        for id in fold {
            assert!(
                covered.insert(id.as_str()),
                "dialogue {id} appears in two folds"
            );
            assert!(by_id.contains_key(id.as_str()), "unknown dialogue {id}");
        }
    }
    assert_eq!(
        covered.len(),
        by_id.len(),
        "folds must partition the corpus"
    );

    let mut confusion = ConfusionMatrix::new(dimension.codes());
    for (fold_index, fold) in folds.folds.iter().enumerate() {
        let held_out: BTreeSet<&str> = fold.iter().map(String::as_str).collect();
        let turn_count: usize = fold.iter().map(|id| by_id[id.as_str()].turns.len()).sum();
        if turn_count == 0 {
            return Err(Error::EmptyFold { fold: fold_index });
        }
        let train: Vec<&LabeledDialogue> = corpus
            .dialogues
            .iter()
            .filter(|d| !held_out.contains(d.dialogue_id.as_str()))
            .collect();
        let mut fold_hyper = *hyper;
        fold_hyper.seed = hyper.seed.wrapping_add(fold_index as u64);
        let model = train_tagger(train.iter().copied(), dimension, &fold_hyper)?;
        for id in fold {
            let dialogue = by_id[id.as_str()];
            let predicted = decode_dialogue(&model, &dialogue.turns)?;
            for (turn, &pred) in dialogue.turns.iter().zip(&predicted) {
                confusion.add(turn.label_index(dimension), pred);
            }
        }
    }
    let MacroF1 {
        per_label_f1,
        macro_f1: macro_avg,
    } = macro_f1(&confusion)?;
    Ok(TaggerEvaluation {
        dimension,
        confusion,
        per_label_f1,
        macro_f1: macro_avg,
    })
}
