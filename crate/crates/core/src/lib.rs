//! Toolkit for building and modeling explanation dialogues.
//!
//! The pipeline goes from raw comment-tree dumps to trained models:
//!
//! 1. [`corpus`] — parse newline-delimited comment records into thread trees
//!    and extract alternating explainee/explainer dialogues.
//! 2. [`annotation`] — turn-label taxonomies, multi-annotator judgment
//!    aggregation with an EM item-response model, and inter-annotator
//!    agreement statistics.
//! 3. [`flow`] — label distributions, quality-conditioned distributions, and
//!    frequent label-flow patterns.
//! 4. [`crf`] — a linear-chain CRF turn tagger over sparse features.
//! 5. [`quality`] — a flow-augmented ridge-regression ensemble predicting
//!    per-dialogue quality scores, with early-prediction evaluation.
//! 6. [`metrics`] — shared macro-F1 and RMSE/MAE implementations.
//!
//! Numeric kernels are generic over the scalar type via [`scalar::Real`];
//! the aliases below fix `f64`, which is what the CLI and the file formats
//! use.

pub mod annotation;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod flow;
pub mod io;
pub mod metrics;
pub mod quality;
pub mod scalar;

pub use error::{Error, Result};

/// Default scalar for the CLI and all serialized artifacts.
pub type Scalar = f64;

pub type AggregatedLabels = annotation::AggregatedLabels<Scalar>;
pub type AnnotatorModel = annotation::AnnotatorModel<Scalar>;
pub type EmConfig = annotation::EmConfig<Scalar>;
pub type CrfModel = crf::CrfModel<Scalar>;
pub type CrfGradient = crf::CrfGradient<Scalar>;
pub type FeatureVector = crf::FeatureVector<Scalar>;
pub type TaggerHyper = crf::TaggerHyper<Scalar>;
pub type QualityEnsemble = quality::QualityEnsemble<Scalar>;
pub type QualityFeatureVector = quality::QualityFeatureVector<Scalar>;
pub type BaselinePredictor = quality::BaselinePredictor<Scalar>;
pub type RmseMae = metrics::RmseMae<Scalar>;
pub type MacroF1 = metrics::MacroF1<Scalar>;
