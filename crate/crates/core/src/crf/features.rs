//! Sparse turn features with stable 64-bit ids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::LabeledTurn;
use crate::corpus::{tokenize_lower, SpeakerRole, Turn};
use crate::scalar::Real;

/// FNV-1a. The feature space is addressed by this hash alone, so it must be
/// identical across runs and platforms; hash collisions are ignored.
pub fn stable_hash(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in s.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Sparse feature vector keyed by stable feature ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector<R> {
    pub features: BTreeMap<u64, R>,
}

impl<R: Real> FeatureVector<R> {
    pub fn new() -> Self {
        FeatureVector {
            features: BTreeMap::new(),
        }
    }

    /// Set a binary feature by name.
    pub fn set(&mut self, name: &str) {
        self.features.insert(stable_hash(name), R::one());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.features.contains_key(&stable_hash(name))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &R)> {
        self.features.iter()
    }
}

/// A minimal view of a turn, so both raw and labeled dialogues can be
/// tagged.
pub trait TurnText {
    fn role(&self) -> SpeakerRole;
    fn text(&self) -> &str;
    fn token_count(&self) -> usize;
}

impl TurnText for Turn {
    fn role(&self) -> SpeakerRole {
        self.speaker_role
    }
    fn text(&self) -> &str {
        &self.text
    }
    fn token_count(&self) -> usize {
        self.token_count
    }
}

impl TurnText for LabeledTurn {
    fn role(&self) -> SpeakerRole {
        self.speaker_role
    }
    fn text(&self) -> &str {
        &self.text
    }
    fn token_count(&self) -> usize {
        self.token_count
    }
}

/// Binary features for one turn: token unigrams and bigrams, speaker role,
/// position bucket, length bucket, question-mark presence, and a bias.
pub fn extract_turn_features<R: Real, T: TurnText>(turns: &[T], index: usize) -> FeatureVector<R> {
    assert!(index < turns.len(), "turn index out of range");
    let turn = &turns[index];
    let mut fv = FeatureVector::new();
    fv.set("bias");
    fv.set(match turn.role() {
        SpeakerRole::Explainee => "role=explainee",
        SpeakerRole::Explainer => "role=explainer",
    });

    let position = if index == 0 {
        "pos=first"
    } else {
        let fraction = index as f64 / turns.len() as f64;
        if fraction < 0.25 {
            "pos=early"
        } else if fraction < 0.75 {
            "pos=mid"
        } else {
            "pos=late"
        }
    };
    fv.set(position);

    let length = if turn.token_count() < 10 {
        "len=short"
    } else if turn.token_count() < 50 {
        "len=med"
    } else {
        "len=long"
    };
    fv.set(length);

    if turn.text().contains('?') {
        fv.set("qm=1");
    }

    let tokens = tokenize_lower(turn.text());
    for token in &tokens {
        fv.set(&format!("w={token}"));
    }
    for pair in tokens.windows(2) {
        fv.set(&format!("b={}|{}", pair[0], pair[1]));
    }
    fv
}

/// Feature vectors for every turn of a dialogue.
pub fn extract_sequence_features<R: Real, T: TurnText>(turns: &[T]) -> Vec<FeatureVector<R>> {
    (0..turns.len())
        .map(|i| extract_turn_features(turns, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(role: SpeakerRole, text: &str) -> Turn {
        Turn {
            speaker_role: role,
            author: "a".to_string(),
            text: text.to_string(),
            token_count: tokenize_lower(text).len().max(1),
            source_comment_id: "c".to_string(),
        }
    }

    #[test]
    fn first_short_question_fires_expected_features() {
        let turns = vec![
            turn(SpeakerRole::Explainee, "Why?"),
            turn(SpeakerRole::Explainer, "Because."),
        ];
        let fv: FeatureVector<f64> = extract_turn_features(&turns, 0);
        for name in [
            "role=explainee",
            "pos=first",
            "len=short",
            "qm=1",
            "w=why",
            "bias",
        ] {
            assert!(fv.contains(name), "missing {name}");
        }
        assert!(!fv.contains("role=explainer"));
    }

    #[test]
    fn every_turn_fires_at_least_four_features() {
        let turns = vec![
            turn(SpeakerRole::Explainee, "x"),
            turn(SpeakerRole::Explainer, "y"),
            turn(SpeakerRole::Explainee, "z"),
        ];
        for i in 0..turns.len() {
            let fv: FeatureVector<f64> = extract_turn_features(&turns, i);
            assert!(fv.len() >= 4, "turn {i} fired only {} features", fv.len());
        }
    }

    #[test]
    fn identical_turns_at_identical_positions_match() {
        let turns = vec![
            turn(SpeakerRole::Explainee, "How does this work?"),
            turn(SpeakerRole::Explainer, "Like so and so."),
        ];
        let a: FeatureVector<f64> = extract_turn_features(&turns, 1);
        let b: FeatureVector<f64> = extract_turn_features(&turns, 1);
        assert_eq!(a, b);
    }

    #[test]
    fn bigrams_join_adjacent_tokens() {
        let turns = vec![turn(SpeakerRole::Explainee, "the blue sky")];
        let fv: FeatureVector<f64> = extract_turn_features(&turns, 0);
        assert!(fv.contains("b=the|blue"));
        assert!(fv.contains("b=blue|sky"));
        assert!(!fv.contains("b=the|sky"));
    }

    #[test]
    fn position_buckets_cover_the_dialogue() {
        let turns: Vec<Turn> = (0..8)
            .map(|i| {
                turn(
                    if i % 2 == 0 {
                        SpeakerRole::Explainee
                    } else {
                        SpeakerRole::Explainer
                    },
                    "words",
                )
            })
            .collect();
        let buckets: Vec<&str> = (0..8)
            .map(|i| {
                let fv: FeatureVector<f64> = extract_turn_features(&turns, i);
                ["pos=first", "pos=early", "pos=mid", "pos=late"]
                    .into_iter()
                    .find(|b| fv.contains(b))
                    .unwrap()
            })
            .collect();
        assert_eq!(
            buckets,
            [
                "pos=first",
                "pos=early",
                "pos=mid",
                "pos=mid",
                "pos=mid",
                "pos=mid",
                "pos=late",
                "pos=late"
            ]
        );
    }

    #[test]
    fn stable_hash_is_fixed() {
        // FNV-1a of an empty string is the offset basis.
        assert_eq!(stable_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash("bias"), stable_hash("bias"));
        assert_ne!(stable_hash("w=a"), stable_hash("w=b"));
    }
}
