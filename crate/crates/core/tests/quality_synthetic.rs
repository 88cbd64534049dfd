//! End-to-end checks of the quality model on a corpus whose score is a
//! pure function of the act flow.

mod common;

use std::collections::BTreeMap;

use common::{flow_corpus, FlowCorpusConfig, TextSignal};
use exdial::annotation::{Dimension, LabeledDialogue, Split};
use exdial::crf::{decode_dialogue, train_tagger, TaggerHyper};
use exdial::quality::{
    early_prediction_curve, evaluate_quality, gold_scores, predict_with_predicted_labels,
    train_quality, Augmentation, QualityHyper,
};

fn rmse_of(ensemble: &exdial::QualityEnsemble, dialogues: &[&LabeledDialogue]) -> f64 {
    let pred: Vec<f64> = dialogues
        .iter()
        .map(|d| ensemble.predict(d, 1.0).unwrap())
        .collect();
    let gold: Vec<f64> = gold_scores(dialogues.iter().copied());
    evaluate_quality(&pred, &gold).unwrap().rmse
}

#[test]
fn acts_augmentation_fits_the_flow_signal() {
    let corpus = flow_corpus(&FlowCorpusConfig {
        dialogues: 120,
        topics: 24,
        text_signal: TextSignal::None,
        seed: 41,
    });
    let train: Vec<&LabeledDialogue> = corpus.split(Split::Train).collect();
    let hyper = QualityHyper::<f64>::new(7);
    let ensemble = train_quality(train.iter().copied(), Augmentation::Acts, &hyper).unwrap();
    let train_rmse = rmse_of(&ensemble, &train);
    assert!(train_rmse <= 0.5, "training RMSE {train_rmse}");

    // A held-out dialogue ending in an agreeing statement predicts high.
    let agreeing_test = corpus
        .split(Split::Test)
        .find(|d| d.turns.last().unwrap().act == exdial::annotation::ActLabel::AgreeingStatement)
        .expect("test split has an agreeing dialogue");
    let prediction = ensemble.predict(agreeing_test, 1.0).unwrap();
    assert!(prediction >= 4.0, "prediction {prediction}");
}

#[test]
fn flow_features_beat_plain_text_when_quality_is_flow_determined() {
    let corpus = flow_corpus(&FlowCorpusConfig {
        dialogues: 120,
        topics: 24,
        text_signal: TextSignal::None,
        seed: 43,
    });
    let train: Vec<&LabeledDialogue> = corpus.split(Split::Train).collect();
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    let hyper = QualityHyper::<f64>::new(11);
    let plain = train_quality(train.iter().copied(), Augmentation::Plain, &hyper).unwrap();
    let acts = train_quality(train.iter().copied(), Augmentation::Acts, &hyper).unwrap();
    let plain_rmse = rmse_of(&plain, &test);
    let acts_rmse = rmse_of(&acts, &test);
    assert!(
        acts_rmse <= 0.8 * plain_rmse,
        "acts {acts_rmse} vs plain {plain_rmse}"
    );
}

#[test]
fn oracle_taggers_reproduce_gold_label_predictions() {
    // Markers are fully reliable, so a trained tagger decodes gold labels.
    let corpus = flow_corpus(&FlowCorpusConfig {
        dialogues: 100,
        topics: 20,
        text_signal: TextSignal::Marker(1.0),
        seed: 47,
    });
    let train: Vec<&LabeledDialogue> = corpus.split(Split::Train).collect();
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    let tagger = train_tagger(
        train.iter().copied(),
        Dimension::Act,
        &TaggerHyper::<f64>::new(3),
    )
    .unwrap();
    for d in &test {
        let decoded = decode_dialogue(&tagger, &d.turns).unwrap();
        let gold: Vec<usize> = d
            .turns
            .iter()
            .map(|t| t.label_index(Dimension::Act))
            .collect();
        assert_eq!(decoded, gold, "oracle tagger must decode gold labels");
    }

    let ensemble = train_quality(
        train.iter().copied(),
        Augmentation::Acts,
        &QualityHyper::<f64>::new(13),
    )
    .unwrap();
    let mut taggers = BTreeMap::new();
    taggers.insert(Dimension::Act, tagger);
    for d in &test {
        let with_predicted = predict_with_predicted_labels(&ensemble, d, &taggers).unwrap();
        let with_gold = ensemble.predict(d, 1.0).unwrap();
        assert_eq!(with_predicted.to_bits(), with_gold.to_bits());
    }
}

#[test]
fn noisy_taggers_cannot_beat_gold_labels() {
    // Markers are 70% reliable, so the trained tagger carries roughly 30%
    // label noise into the quality model.
    let corpus = flow_corpus(&FlowCorpusConfig {
        dialogues: 120,
        topics: 24,
        text_signal: TextSignal::Marker(0.7),
        seed: 53,
    });
    let train: Vec<&LabeledDialogue> = corpus.split(Split::Train).collect();
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    let tagger = train_tagger(
        train.iter().copied(),
        Dimension::Act,
        &TaggerHyper::<f64>::new(3),
    )
    .unwrap();
    let ensemble = train_quality(
        train.iter().copied(),
        Augmentation::Acts,
        &QualityHyper::<f64>::new(13),
    )
    .unwrap();
    let mut taggers = BTreeMap::new();
    taggers.insert(Dimension::Act, tagger);

    let gold: Vec<f64> = gold_scores(test.iter().copied());
    let pred_gold_labels: Vec<f64> = test
        .iter()
        .map(|d| ensemble.predict(d, 1.0).unwrap())
        .collect();
    let pred_noisy_labels: Vec<f64> = test
        .iter()
        .map(|d| predict_with_predicted_labels(&ensemble, d, &taggers).unwrap())
        .collect();
    let rmse_gold = evaluate_quality(&pred_gold_labels, &gold).unwrap().rmse;
    let rmse_noisy = evaluate_quality(&pred_noisy_labels, &gold).unwrap().rmse;
    assert!(
        rmse_noisy >= rmse_gold,
        "noisy labels {rmse_noisy} vs gold {rmse_gold}"
    );
}

#[test]
fn late_signal_shows_up_in_the_early_prediction_curve() {
    let corpus = flow_corpus(&FlowCorpusConfig {
        dialogues: 120,
        topics: 24,
        text_signal: TextSignal::None,
        seed: 59,
    });
    let train: Vec<&LabeledDialogue> = corpus.split(Split::Train).collect();
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    let ensemble = train_quality(
        train.iter().copied(),
        Augmentation::Acts,
        &QualityHyper::<f64>::new(17),
    )
    .unwrap();
    let points =
        early_prediction_curve(&ensemble, &test, &[10, 20, 30, 40, 50, 60, 70, 80, 90, 100])
            .unwrap();
    let at = |pct: u32| points.iter().find(|p| p.percentage == pct).unwrap().rmse;
    assert!(
        at(100) < at(10),
        "RMSE(100%) {} should beat RMSE(10%) {}",
        at(100),
        at(10)
    );
}
