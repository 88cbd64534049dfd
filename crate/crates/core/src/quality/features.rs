//! Feature construction for dialogue-quality prediction.
//!
//! Three namespaces: text (token unigram counts filtered by a vocabulary
//! fixed at training time), structural (turn count, mean turn length,
//! explainee share), and flow (label n-grams up to trigrams when an
//! augmentation is active). Early prediction reuses the same path with a
//! truncation fraction: only the first `ceil(p * n)` turns contribute.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{Dimension, LabeledDialogue, LabeledTurn};
use crate::corpus::{tokenize_lower, SpeakerRole};
use crate::crf::stable_hash;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which label dimensions augment the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    Plain,
    Moves,
    Acts,
    Topics,
    All,
}

impl Augmentation {
    pub const ALL_VARIANTS: &'static [Augmentation] = &[
        Augmentation::Plain,
        Augmentation::Moves,
        Augmentation::Acts,
        Augmentation::Topics,
        Augmentation::All,
    ];

    /// The turn-label dimensions this augmentation encodes.
    pub fn dimensions(self) -> &'static [Dimension] {
        match self {
            Augmentation::Plain => &[],
            Augmentation::Moves => &[Dimension::Move],
            Augmentation::Acts => &[Dimension::Act],
            Augmentation::Topics => &[Dimension::Topic],
            Augmentation::All => Dimension::TURN,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Augmentation::Plain => "plain",
            Augmentation::Moves => "moves",
            Augmentation::Acts => "acts",
            Augmentation::Topics => "topics",
            Augmentation::All => "all",
        }
    }
}

impl FromStr for Augmentation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Augmentation::ALL_VARIANTS
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "augmentation",
                reason: format!("unknown augmentation {s:?}"),
            })
    }
}

impl std::fmt::Display for Augmentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Text-token vocabulary, fixed on the training split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityVocab {
    pub tokens: BTreeSet<String>,
    pub min_frequency: usize,
}

impl QualityVocab {
    /// Keep lowercased tokens whose total occurrence count over all turns
    /// reaches `min_frequency`.
    pub fn build<'a>(
        dialogues: impl IntoIterator<Item = &'a LabeledDialogue>,
        min_frequency: usize,
    ) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for dialogue in dialogues {
            for turn in &dialogue.turns {
                for token in tokenize_lower(&turn.text) {
                    *counts.entry(token).or_insert(0) += 1;
                }
            }
        }
        QualityVocab {
            tokens: counts
                .into_iter()
                .filter(|(_, c)| *c >= min_frequency)
                .map(|(t, _)| t)
                .collect(),
            min_frequency,
        }
    }
}

/// Sparse feature vector with real-valued counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityFeatureVector<R> {
    pub features: BTreeMap<u64, R>,
}

impl<R: Real> QualityFeatureVector<R> {
    pub fn new() -> Self {
        QualityFeatureVector {
            features: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: &str, value: R) {
        let entry = self
            .features
            .entry(stable_hash(name))
            .or_insert_with(R::zero);
        *entry = *entry + value;
    }

    fn put(&mut self, name: &str, value: R) {
        self.features.insert(stable_hash(name), value);
    }

    pub fn get(&self, name: &str) -> Option<R> {
        self.features.get(&stable_hash(name)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &R)> {
        self.features.iter()
    }
}

/// Number of turns included at truncation fraction `p`.
pub fn included_turns(turn_count: usize, p: f64) -> usize {
    ((p * turn_count as f64).ceil() as usize).clamp(1, turn_count)
}

/// Build the quality features of one dialogue over its first `ceil(p * n)`
/// turns.
pub fn build_quality_features<R: Real>(
    dialogue: &LabeledDialogue,
    augmentation: Augmentation,
    p: f64,
    vocab: &QualityVocab,
) -> Result<QualityFeatureVector<R>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("truncation fraction must be in (0, 1], got {p}"),
        });
    }
    let included = included_turns(dialogue.turns.len(), p);
    let turns = &dialogue.turns[..included];
    let mut fv = QualityFeatureVector::new();

    for turn in turns {
        for token in tokenize_lower(&turn.text) {
            if vocab.tokens.contains(&token) {
                fv.add(&format!("t={token}"), R::one());
            }
        }
    }

    fv.put("s=turn_count", R::from_usize_lossy(included));
    let mean_tokens = turns.iter().map(|t| t.token_count).sum::<usize>() as f64 / included as f64;
    fv.put("s=mean_tokens", R::from_f64_lossy(mean_tokens));
    let explainee = turns
        .iter()
        .filter(|t| t.speaker_role == SpeakerRole::Explainee)
        .count();
    fv.put(
        "s=explainee_frac",
        R::from_f64_lossy(explainee as f64 / included as f64),
    );

    for &dimension in augmentation.dimensions() {
        add_flow_features(&mut fv, turns, dimension);
    }
    Ok(fv)
}

/// (role:label) unigrams plus label bigrams and trigrams for one dimension.
fn add_flow_features<R: Real>(
    fv: &mut QualityFeatureVector<R>,
    turns: &[LabeledTurn],
    dimension: Dimension,
) {
    let dim = dimension.as_str();
    let codes: Vec<String> = turns
        .iter()
        .map(|t| dimension.code_of(t.label_index(dimension)))
        .collect();
    for (turn, code) in turns.iter().zip(&codes) {
        let role = match turn.speaker_role {
            SpeakerRole::Explainee => "explainee",
            SpeakerRole::Explainer => "explainer",
        };
        fv.add(&format!("{dim}:{role}:{code}"), R::one());
    }
    for pair in codes.windows(2) {
        fv.add(&format!("{dim}:{}->{}", pair[0], pair[1]), R::one());
    }
    for triple in codes.windows(3) {
        fv.add(
            &format!("{dim}:{}->{}->{}", triple[0], triple[1], triple[2]),
            R::one(),
        );
    }
}
