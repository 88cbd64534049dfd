//! Linear-chain CRF turn tagger over sparse features.

mod features;
mod model;
mod train;

pub use features::{
    extract_sequence_features, extract_turn_features, stable_hash, FeatureVector, TurnText,
};
pub use model::{CrfGradient, CrfModel, MODEL_FORMAT_VERSION};
pub use train::{
    decode_dialogue, evaluate_tagger, plan_folds, train_tagger, FoldPlan, TaggerEvaluation,
    TaggerHyper,
};
