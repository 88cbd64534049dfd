//! Shared generators for the integration and acceptance tests. Everything
//! is seeded and deterministic.

#![allow(dead_code)]

use exdial::annotation::{
    ActLabel, LabeledCorpus, LabeledDialogue, LabeledTurn, MoveLabel, QualityScore, Split,
    TopicLabel,
};
use exdial::corpus::{tokenize_lower, CommentRecord, SpeakerRole};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn record(
    id: &str,
    parent: Option<&str>,
    thread: &str,
    author: &str,
    body: &str,
    score: i64,
    created_utc: i64,
) -> CommentRecord {
    CommentRecord {
        id: id.to_string(),
        parent_id: parent.map(str::to_string),
        thread_id: thread.to_string(),
        author: author.to_string(),
        body: body.to_string(),
        score,
        created_utc,
    }
}

const BODIES: [&str; 10] = [
    "Why does this happen at all?",
    "Because the underlying process has two phases.",
    "Could you explain the second phase a bit more?",
    "Sure, it is driven by feedback between the parts.",
    "That makes sense now, thanks!",
    "Hmm, I am not sure I follow.",
    "...",
    "",
    "Think of it like water finding the lowest point.",
    "So the shape of the container decides the outcome?",
];

/// Random comment records for one thread. Half the threads look like real
/// conversations (mostly-alternating two-party reply chains with occasional
/// interruptions); the rest attach comments anywhere. Parents always point
/// at earlier records, so the result is acyclic, with occasional orphans,
/// deleted authors, third parties, and junk bodies.
pub fn random_thread_records(rng: &mut ChaCha8Rng, thread_index: usize) -> Vec<CommentRecord> {
    let thread_id = format!("rt{thread_index}");
    let authors = ["ann", "ben", "cem", "dia", "[deleted]"];
    let conversational = rng.gen_bool(0.5);
    let base_time = 1_600_000_000 + thread_index as i64 * 10_000;

    let root_author = if conversational && !rng.gen_bool(0.05) {
        "ann"
    } else {
        authors[rng.gen_range(0..authors.len())]
    };
    let mut records = vec![CommentRecord {
        id: format!("{thread_id}-0"),
        parent_id: None,
        thread_id: thread_id.clone(),
        author: root_author.to_string(),
        body: BODIES[rng.gen_range(0..BODIES.len())].to_string(),
        score: rng.gen_range(-2..30),
        created_utc: base_time,
    }];

    if conversational {
        // A reply chain between ann and ben, with side noise.
        let depth = rng.gen_range(6..16usize);
        let mut parent = records[0].id.clone();
        for i in 1..=depth {
            let author = match rng.gen_range(0..20) {
                0 => "cem",
                1 | 2 => {
                    // Break alternation with a self-reply now and then.
                    if rng.gen_bool(0.5) {
                        "ann"
                    } else {
                        "ben"
                    }
                }
                _ => {
                    if i % 2 == 1 {
                        "ben"
                    } else {
                        "ann"
                    }
                }
            };
            let id = format!("{thread_id}-{i}");
            records.push(CommentRecord {
                id: id.clone(),
                parent_id: Some(parent.clone()),
                thread_id: thread_id.clone(),
                author: author.to_string(),
                body: BODIES[rng.gen_range(0..BODIES.len())].to_string(),
                score: rng.gen_range(2..30),
                created_utc: base_time + i as i64,
            });
            parent = id;
        }
        // Stray low-scoring comments hanging off random points; they stay
        // off the best-child path but still exercise the parser.
        for j in 0..rng.gen_range(0..5usize) {
            let parent = records[rng.gen_range(0..records.len())].id.clone();
            records.push(CommentRecord {
                id: format!("{thread_id}-x{j}"),
                parent_id: Some(parent),
                thread_id: thread_id.clone(),
                author: authors[rng.gen_range(0..authors.len())].to_string(),
                body: BODIES[rng.gen_range(0..BODIES.len())].to_string(),
                score: rng.gen_range(-2..2),
                created_utc: base_time + 100 + j as i64,
            });
        }
    } else {
        let n = rng.gen_range(1..40usize);
        for i in 1..n {
            let parent = if rng.gen_bool(0.05) {
                "nowhere".to_string()
            } else {
                records[rng.gen_range(0..records.len())].id.clone()
            };
            records.push(CommentRecord {
                id: format!("{thread_id}-{i}"),
                parent_id: Some(parent),
                thread_id: thread_id.clone(),
                author: authors[rng.gen_range(0..authors.len())].to_string(),
                body: BODIES[rng.gen_range(0..BODIES.len())].to_string(),
                score: rng.gen_range(-2..30),
                created_utc: base_time + i as i64,
            });
        }
    }
    records
}

/// How turn text relates to the act labels in [`flow_corpus`].
#[derive(Clone, Copy)]
pub enum TextSignal {
    /// Filler tokens only; text says nothing about labels or quality.
    None,
    /// Each turn carries a marker token naming its act with this
    /// probability, and a random wrong marker otherwise.
    Marker(f64),
}

pub struct FlowCorpusConfig {
    pub dialogues: usize,
    pub topics: usize,
    pub text_signal: TextSignal,
    pub seed: u64,
}

/// Synthetic corpus whose quality is a pure function of the act flow: a
/// dialogue ending in an agreeing statement scores 5, one ending in a
/// disagreeing statement scores 1. Middle turns use only ask/inform acts,
/// so the final act carries the whole signal.
pub fn flow_corpus(config: &FlowCorpusConfig) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler = [
        "the", "a", "it", "so", "well", "really", "quite", "sound", "thing", "point",
    ];
    let used_acts = [2usize, 8, 6, 7]; // d3, d9, d7, d8
    let train_topics = (config.topics * 3) / 4;

    let dialogues = (0..config.dialogues)
        .map(|d| {
            let topic_index = d % config.topics;
            let n_turns = rng.gen_range(6..=10usize);
            let final_agrees = rng.gen_bool(0.5);
            let turns: Vec<LabeledTurn> = (0..n_turns)
                .map(|i| {
                    let act = if i + 1 == n_turns {
                        if final_agrees {
                            6 // d7, agreeing
                        } else {
                            7 // d8, disagreeing
                        }
                    } else if rng.gen_bool(0.5) {
                        2 // d3
                    } else {
                        8 // d9
                    };
                    let mut words: Vec<String> = (0..rng.gen_range(4..9usize))
                        .map(|_| filler[rng.gen_range(0..filler.len())].to_string())
                        .collect();
                    if let TextSignal::Marker(reliability) = config.text_signal {
                        let marked_act = if rng.gen_bool(reliability) {
                            act
                        } else {
                            // A wrong marker pointing at one of the other
                            // acts in play.
                            loop {
                                let other = used_acts[rng.gen_range(0..used_acts.len())];
                                if other != act {
                                    break other;
                                }
                            }
                        };
                        words.push(format!("mkd{}", marked_act + 1));
                    }
                    let text = words.join(" ");
                    LabeledTurn {
                        speaker_role: if i % 2 == 0 {
                            SpeakerRole::Explainee
                        } else {
                            SpeakerRole::Explainer
                        },
                        author: if i % 2 == 0 { "a" } else { "b" }.to_string(),
                        token_count: tokenize_lower(&text).len(),
                        text,
                        source_comment_id: format!("fd{d}-c{i}"),
                        move_label: MoveLabel::ALL[rng.gen_range(0..10)],
                        act: ActLabel::ALL[act],
                        topic: TopicLabel::ALL[rng.gen_range(0..4)],
                    }
                })
                .collect();
            LabeledDialogue {
                dialogue_id: format!("fd{d}"),
                topic_question: format!("flow topic {topic_index}"),
                turns,
                explainee_author: "a".to_string(),
                explainer_author: "b".to_string(),
                quality: QualityScore::new(if final_agrees { 5 } else { 1 }).unwrap(),
                split: if topic_index < train_topics {
                    Split::Train
                } else {
                    Split::Test
                },
            }
        })
        .collect();
    LabeledCorpus { dialogues }
}

/// Synthetic tagging corpus where the label sequence follows a strong
/// first-order cycle (next = previous + 1 mod 4 with probability 0.9) and
/// the text marker names the true label only 55% of the time. Transitions
/// carry most of the signal, emissions little.
pub fn transition_dominant_corpus(dialogues: usize, seed: u64) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dialogues = (0..dialogues)
        .map(|d| {
            let n_turns = 8;
            let mut label = rng.gen_range(0..4usize);
            let turns: Vec<LabeledTurn> = (0..n_turns)
                .map(|i| {
                    if i > 0 {
                        label = if rng.gen_bool(0.9) {
                            (label + 1) % 4
                        } else {
                            rng.gen_range(0..4)
                        };
                    }
                    let marked = if rng.gen_bool(0.55) {
                        label
                    } else {
                        rng.gen_range(0..4)
                    };
                    let text = format!("sig{marked} plus other words");
                    LabeledTurn {
                        speaker_role: if i % 2 == 0 {
                            SpeakerRole::Explainee
                        } else {
                            SpeakerRole::Explainer
                        },
                        author: if i % 2 == 0 { "a" } else { "b" }.to_string(),
                        token_count: tokenize_lower(&text).len(),
                        text,
                        source_comment_id: format!("td{d}-c{i}"),
                        move_label: MoveLabel::ALL[label % 10],
                        act: ActLabel::ALL[label % 10],
                        topic: TopicLabel::ALL[label],
                    }
                })
                .collect();
            LabeledDialogue {
                dialogue_id: format!("td{d}"),
                topic_question: format!("markov topic {}", d % 20),
                turns,
                explainee_author: "a".to_string(),
                explainer_author: "b".to_string(),
                quality: QualityScore::new(3).unwrap(),
                split: Split::Train,
            }
        })
        .collect();
    LabeledCorpus { dialogues }
}
