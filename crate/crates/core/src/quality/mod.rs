//! Dialogue-quality prediction: flow-augmented features, a ridge ensemble,
//! an average baseline, and early-prediction evaluation.

mod ensemble;
mod features;
mod ridge;

pub use ensemble::{
    early_prediction_curve, evaluate_quality, gold_scores, predict_with_predicted_labels,
    train_quality, BaselinePredictor, EarlyPoint, QualityEnsemble, QualityHyper, QualityMember,
    ENSEMBLE_FORMAT_VERSION,
};
pub use features::{
    build_quality_features, included_turns, Augmentation, QualityFeatureVector, QualityVocab,
};
pub use ridge::{fit_ridge, RidgeFit};
