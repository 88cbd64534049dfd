//! Attach consolidated labels to dialogues and split them into train/test
//! by topic question.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::em::{aggregate_em, AnnotationSet, EmConfig};
use crate::annotation::labels::{ActLabel, Dimension, MoveLabel, QualityScore, TopicLabel};
use crate::corpus::{Dialogue, SpeakerRole, Turn};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A turn with its consolidated labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTurn {
    pub speaker_role: SpeakerRole,
    pub author: String,
    pub text: String,
    pub token_count: usize,
    pub source_comment_id: String,
    #[serde(rename = "move")]
    pub move_label: MoveLabel,
    pub act: ActLabel,
    pub topic: TopicLabel,
}

impl LabeledTurn {
    pub fn label_index(&self, dimension: Dimension) -> usize {
        match dimension {
            Dimension::Move => self.move_label.index(),
            Dimension::Act => self.act.index(),
            Dimension::Topic => self.topic.index(),
            Dimension::Quality => panic!("quality is a dialogue-level dimension"),
        }
    }

    pub fn with_label_index(&self, dimension: Dimension, index: usize) -> LabeledTurn {
        let mut turn = self.clone();
        match dimension {
            Dimension::Move => turn.move_label = MoveLabel::from_index(index).expect("valid move"),
            Dimension::Act => turn.act = ActLabel::from_index(index).expect("valid act"),
            Dimension::Topic => turn.topic = TopicLabel::from_index(index).expect("valid topic"),
            Dimension::Quality => panic!("quality is a dialogue-level dimension"),
        }
        turn
    }
}

/// A dialogue with consolidated labels, a quality score, and its split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDialogue {
    pub dialogue_id: String,
    pub topic_question: String,
    pub turns: Vec<LabeledTurn>,
    pub explainee_author: String,
    pub explainer_author: String,
    pub quality: QualityScore,
    pub split: Split,
}

impl LabeledDialogue {
    pub fn turn_item_id(&self, index: usize) -> String {
        format!("{}#{}", self.dialogue_id, index)
    }
}

/// The consolidated corpus; dialogue order follows the input file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub dialogues: Vec<LabeledDialogue>,
}

impl LabeledCorpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledDialogue> {
        self.dialogues.iter().filter(move |d| d.split == split)
    }

    pub fn topics(&self) -> Vec<&str> {
        let mut topics: Vec<&str> = self
            .dialogues
            .iter()
            .map(|d| d.topic_question.as_str())
            .collect();
        topics.sort();
        topics.dedup();
        topics
    }
}

/// How dialogue quality judgments are consolidated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityMode {
    /// Same categorical EM as the turn dimensions, over the 5 scores.
    Em,
    /// Lower median of the raw judgments.
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidateConfig<R> {
    pub em: EmConfig<R>,
    pub quality_mode: QualityMode,
    /// Train/test topic proportions, default 154:50.
    pub train_weight: u64,
    pub test_weight: u64,
    /// Seed for the topic shuffle (independent of the EM seed).
    pub split_seed: u64,
}

impl<R: Real> ConsolidateConfig<R> {
    pub fn new(seed: u64) -> Self {
        ConsolidateConfig {
            em: EmConfig::new(seed),
            quality_mode: QualityMode::Em,
            train_weight: 154,
            test_weight: 50,
            split_seed: seed.wrapping_add(0x5EED_5EED),
        }
    }
}

/// Consolidate per-dimension annotations onto dialogues and assign splits.
///
/// Every turn must carry move/act/topic judgments and every dialogue a
/// quality judgment; annotations for unknown items are ignored.
pub fn consolidate_corpus<R: Real>(
    dialogues: &[Dialogue],
    annotations: &BTreeMap<Dimension, Vec<AnnotationSet>>,
    config: &ConsolidateConfig<R>,
) -> Result<LabeledCorpus> {
    let mut hard: BTreeMap<Dimension, BTreeMap<String, usize>> = BTreeMap::new();
    for &dimension in Dimension::ALL {
        let sets = annotations
            .get(&dimension)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        if sets.is_empty() {
            continue;
        }
        let labels =
            if dimension == Dimension::Quality && config.quality_mode == QualityMode::Median {
                sets.iter()
                    .map(|set| (set.item_id.clone(), lower_median(set)))
                    .collect()
            } else {
                let mut em = config.em;
                // Decorrelate the per-dimension EM streams.
                em.seed = config.em.seed.wrapping_add(dimension as u64);
                let (aggregated, _) = aggregate_em(sets, &em)?;
                aggregated.hard_label
            };
        hard.insert(dimension, labels);
    }

    let label_for = |dimension: Dimension, item_id: &str| -> Result<usize> {
        hard.get(&dimension)
            .and_then(|m| m.get(item_id))
            .copied()
            .ok_or_else(|| Error::MissingAnnotation {
                item_id: item_id.to_string(),
                dimension: dimension.as_str().to_string(),
            })
    };

    let split_of = assign_splits(dialogues, config)?;

    let mut labeled = Vec::with_capacity(dialogues.len());
    for dialogue in dialogues {
        let mut turns = Vec::with_capacity(dialogue.turns.len());
        for (index, turn) in dialogue.turns.iter().enumerate() {
            let item_id = dialogue.turn_item_id(index);
            turns.push(label_turn(turn, &item_id, &label_for)?);
        }
        let quality_index = label_for(Dimension::Quality, &dialogue.dialogue_id)?;
        labeled.push(LabeledDialogue {
            dialogue_id: dialogue.dialogue_id.clone(),
            topic_question: dialogue.topic_question.clone(),
            turns,
            explainee_author: dialogue.explainee_author.clone(),
            explainer_author: dialogue.explainer_author.clone(),
            quality: QualityScore::from_index(quality_index).expect("quality index in range"),
            split: split_of[&dialogue.topic_question],
        });
    }
    Ok(LabeledCorpus { dialogues: labeled })
}

fn label_turn(
    turn: &Turn,
    item_id: &str,
    label_for: &impl Fn(Dimension, &str) -> Result<usize>,
) -> Result<LabeledTurn> {
    Ok(LabeledTurn {
        speaker_role: turn.speaker_role,
        author: turn.author.clone(),
        text: turn.text.clone(),
        token_count: turn.token_count,
        source_comment_id: turn.source_comment_id.clone(),
        move_label: MoveLabel::from_index(label_for(Dimension::Move, item_id)?)
            .expect("move index in range"),
        act: ActLabel::from_index(label_for(Dimension::Act, item_id)?).expect("act index in range"),
        topic: TopicLabel::from_index(label_for(Dimension::Topic, item_id)?)
            .expect("topic index in range"),
    })
}

/// Lower median of the raw ratings, as a zero-based label index.
fn lower_median(set: &AnnotationSet) -> usize {
    let mut ratings: Vec<usize> = set.judgments.values().copied().collect();
    ratings.sort_unstable();
    ratings[(ratings.len() - 1) / 2]
}

/// Shuffle the sorted topic list with the split seed and cut it so that
/// train : test matches the configured proportions.
fn assign_splits<R: Real>(
    dialogues: &[Dialogue],
    config: &ConsolidateConfig<R>,
) -> Result<BTreeMap<String, Split>> {
    let mut topics: Vec<String> = dialogues.iter().map(|d| d.topic_question.clone()).collect();
    topics.sort();
    topics.dedup();
    if topics.is_empty() {
        return Err(Error::EmptyInput("no dialogues to consolidate".into()));
    }
    let weight_total = config.train_weight + config.test_weight;
    if weight_total == 0 {
        return Err(Error::InvalidParameter {
            name: "train_weight/test_weight",
            reason: "proportions must not both be zero".to_string(),
        });
    }
    // Round half up in integer arithmetic.
    let train_count = ((topics.len() as u64 * config.train_weight * 2 + weight_total)
        / (2 * weight_total)) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(config.split_seed);
    topics.shuffle(&mut rng);
    Ok(topics
        .into_iter()
        .enumerate()
        .map(|(i, topic)| {
            (
                topic,
                if i < train_count {
                    Split::Train
                } else {
                    Split::Test
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn dialogue(id: &str, topic: &str, turn_count: usize) -> Dialogue {
        let turns = (0..turn_count)
            .map(|i| Turn {
                speaker_role: if i % 2 == 0 {
                    SpeakerRole::Explainee
                } else {
                    SpeakerRole::Explainer
                },
                author: if i % 2 == 0 { "a" } else { "b" }.to_string(),
                text: format!("turn {i}"),
                token_count: 2,
                source_comment_id: format!("{id}-c{i}"),
            })
            .collect();
        Dialogue {
            dialogue_id: id.to_string(),
            topic_question: topic.to_string(),
            turns,
            explainee_author: "a".to_string(),
            explainer_author: "b".to_string(),
        }
    }

    fn unanimous_annotations(
        dialogues: &[Dialogue],
        move_idx: usize,
        act_idx: usize,
        topic_idx: usize,
        quality_idx: usize,
    ) -> BTreeMap<Dimension, Vec<AnnotationSet>> {
        let mut map: BTreeMap<Dimension, Vec<AnnotationSet>> = BTreeMap::new();
        let annotators = ["x", "y", "z"];
        for d in dialogues {
            for i in 0..d.turns.len() {
                let item = d.turn_item_id(i);
                for (dim, idx) in [
                    (Dimension::Move, move_idx),
                    (Dimension::Act, act_idx),
                    (Dimension::Topic, topic_idx),
                ] {
                    map.entry(dim).or_default().push(AnnotationSet {
                        item_id: item.clone(),
                        dimension: dim,
                        judgments: annotators.iter().map(|a| (a.to_string(), idx)).collect(),
                    });
                }
            }
            map.entry(Dimension::Quality)
                .or_default()
                .push(AnnotationSet {
                    item_id: d.dialogue_id.clone(),
                    dimension: Dimension::Quality,
                    judgments: annotators
                        .iter()
                        .map(|a| (a.to_string(), quality_idx))
                        .collect(),
                });
        }
        map
    }

    #[test]
    fn unanimous_annotations_become_hard_labels() {
        let dialogues: Vec<Dialogue> = (0..4)
            .map(|i| dialogue(&format!("d{i}"), &format!("topic {i}"), 6))
            .collect();
        let annotations = unanimous_annotations(&dialogues, 2, 8, 0, 3);
        let config = ConsolidateConfig::<f64>::new(7);
        let corpus = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        for d in &corpus.dialogues {
            assert_eq!(d.quality.value(), 4);
            for t in &d.turns {
                assert_eq!(t.move_label, MoveLabel::ProvideExplanation);
                assert_eq!(t.act, ActLabel::InformingStatement);
                assert_eq!(t.topic, TopicLabel::MainTopic);
            }
        }
    }

    #[test]
    fn default_proportions_split_204_topics_into_154_and_50() {
        let dialogues: Vec<Dialogue> = (0..204)
            .map(|i| dialogue(&format!("d{i}"), &format!("topic {i:03}"), 6))
            .collect();
        let annotations = unanimous_annotations(&dialogues, 0, 0, 0, 2);
        let mut config = ConsolidateConfig::<f64>::new(13);
        config.em.restarts = 2;
        config.em.iterations = 5;
        let corpus = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        let train_topics: BTreeSet<&str> = corpus
            .split(Split::Train)
            .map(|d| d.topic_question.as_str())
            .collect();
        let test_topics: BTreeSet<&str> = corpus
            .split(Split::Test)
            .map(|d| d.topic_question.as_str())
            .collect();
        assert_eq!(train_topics.len(), 154);
        assert_eq!(test_topics.len(), 50);
        assert!(train_topics.is_disjoint(&test_topics));
    }

    #[test]
    fn three_to_one_proportions_split_four_topics() {
        let dialogues: Vec<Dialogue> = (0..4)
            .map(|i| dialogue(&format!("d{i}"), &format!("topic {i}"), 6))
            .collect();
        let annotations = unanimous_annotations(&dialogues, 0, 0, 0, 0);
        let mut config = ConsolidateConfig::<f64>::new(3);
        config.train_weight = 3;
        config.test_weight = 1;
        let corpus = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        assert_eq!(corpus.split(Split::Train).count(), 3);
        assert_eq!(corpus.split(Split::Test).count(), 1);
    }

    #[test]
    fn topic_sets_are_disjoint_and_cover_everything() {
        let dialogues: Vec<Dialogue> = (0..20)
            .map(|i| dialogue(&format!("d{i}"), &format!("topic {}", i % 7), 6))
            .collect();
        let annotations = unanimous_annotations(&dialogues, 1, 1, 1, 4);
        let mut config = ConsolidateConfig::<f64>::new(99);
        config.em.restarts = 2;
        config.em.iterations = 5;
        let corpus = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        let train: BTreeSet<&str> = corpus
            .split(Split::Train)
            .map(|d| d.topic_question.as_str())
            .collect();
        let test: BTreeSet<&str> = corpus
            .split(Split::Test)
            .map(|d| d.topic_question.as_str())
            .collect();
        assert!(train.is_disjoint(&test));
        let mut all: BTreeSet<&str> = train.clone();
        all.extend(&test);
        assert_eq!(all.len(), 7);
    }

    #[test]
    fn missing_turn_dimension_is_rejected() {
        let dialogues = vec![dialogue("d0", "topic", 6)];
        let mut annotations = unanimous_annotations(&dialogues, 0, 0, 0, 0);
        annotations
            .get_mut(&Dimension::Act)
            .unwrap()
            .retain(|set| set.item_id != "d0#3");
        let config = ConsolidateConfig::<f64>::new(1);
        match consolidate_corpus(&dialogues, &annotations, &config) {
            Err(Error::MissingAnnotation { item_id, dimension }) => {
                assert_eq!(item_id, "d0#3");
                assert_eq!(dimension, "act");
            }
            other => panic!("expected missing-annotation rejection, got {other:?}"),
        }
    }

    #[test]
    fn median_quality_mode_uses_lower_median() {
        let dialogues = vec![dialogue("d0", "topic", 6)];
        let mut annotations = unanimous_annotations(&dialogues, 0, 0, 0, 0);
        // Quality judgments 2, 4, 5 (indices 1, 3, 4): lower median is 4.
        annotations.insert(
            Dimension::Quality,
            vec![AnnotationSet {
                item_id: "d0".to_string(),
                dimension: Dimension::Quality,
                judgments: [("x", 1usize), ("y", 3), ("z", 4)]
                    .into_iter()
                    .map(|(a, l)| (a.to_string(), l))
                    .collect(),
            }],
        );
        let mut config = ConsolidateConfig::<f64>::new(1);
        config.quality_mode = QualityMode::Median;
        let corpus = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        assert_eq!(corpus.dialogues[0].quality.value(), 4);
    }

    #[test]
    fn consolidation_is_deterministic() {
        let dialogues: Vec<Dialogue> = (0..6)
            .map(|i| dialogue(&format!("d{i}"), &format!("topic {i}"), 6))
            .collect();
        let annotations = unanimous_annotations(&dialogues, 3, 6, 2, 1);
        let mut config = ConsolidateConfig::<f64>::new(21);
        config.em.restarts = 2;
        config.em.iterations = 5;
        let a = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        let b = consolidate_corpus(&dialogues, &annotations, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
