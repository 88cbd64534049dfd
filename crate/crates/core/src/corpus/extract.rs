//! Dialogue extraction from thread trees.
//!
//! The thread creator is the explainee; each sufficiently up-voted
//! first-level comment by another user opens an explainer candidate. From
//! there the walk follows, at every comment, the single best-scoring child
//! (ties to the earlier `created_utc`, then id). A child by the partner
//! starts a new turn; a child by the same author continues the current turn
//! (the texts are later joined by a blank line); anything else — a third
//! party, a deleted author, a body without tokens — ends the walk. Third
//! parties are never skipped over, which keeps the extracted dialogues
//! strictly two-party and strictly alternating.

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::tokenize;
use crate::corpus::tree::{CommentRecord, ThreadTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Explainee,
    Explainer,
}

/// One dialogue turn; consecutive comments by the same author collapse into
/// a single turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker_role: SpeakerRole,
    pub author: String,
    pub text: String,
    pub token_count: usize,
    /// Id of the first comment forming this turn.
    pub source_comment_id: String,
}

/// An alternating explainee/explainer exchange rooted at a question post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub topic_question: String,
    pub turns: Vec<Turn>,
    pub explainee_author: String,
    pub explainer_author: String,
}

impl Dialogue {
    /// Item id used by annotation files to address one turn.
    pub fn turn_item_id(&self, index: usize) -> String {
        format!("{}#{}", self.dialogue_id, index)
    }
}

/// An author that cannot take part in a dialogue.
fn is_deleted(author: &str) -> bool {
    let trimmed = author.trim();
    trimmed.is_empty() || trimmed == "[deleted]"
}

/// A comment can only form (part of) a turn if its body has tokens.
fn usable_text(record: &CommentRecord) -> Option<String> {
    let text = record.body.trim();
    if text.is_empty() || tokenize(text).is_empty() {
        None
    } else {
        Some(text.to_string())
    }
}

struct RawTurn<'a> {
    author: &'a str,
    role: SpeakerRole,
    comments: Vec<&'a CommentRecord>,
}

/// Extract every qualifying dialogue from one thread tree.
///
/// Emits one dialogue per first-level comment with `score >=
/// min_first_level_score` whose author differs from the thread creator,
/// provided the walk accumulates at least `min_turns` turns.
pub fn extract_dialogues(
    tree: &ThreadTree,
    min_turns: usize,
    min_first_level_score: i64,
) -> Result<Vec<Dialogue>> {
    if min_turns < 2 {
        return Err(Error::InvalidParameter {
            name: "min_turns",
            reason: "must be at least 2".to_string(),
        });
    }

    let explainee = tree.root.author.as_str();
    if is_deleted(explainee) {
        log::warn!(
            "thread {:?}: root author absent or deleted, skipping",
            tree.thread_id()
        );
        return Ok(Vec::new());
    }
    let root_text = match usable_text(&tree.root) {
        Some(text) => text,
        None => {
            log::warn!(
                "thread {:?}: root post has no tokens, skipping",
                tree.thread_id()
            );
            return Ok(Vec::new());
        }
    };

    let mut dialogues = Vec::new();
    for first_level_id in tree.child_ids(&tree.root.id) {
        let first = tree.get(first_level_id).expect("child ids resolve");
        if first.score < min_first_level_score
            || is_deleted(&first.author)
            || first.author == explainee
        {
            continue;
        }
        if usable_text(first).is_none() {
            continue;
        }

        let explainer = first.author.as_str();
        let mut turns = vec![
            RawTurn {
                author: explainee,
                role: SpeakerRole::Explainee,
                comments: vec![&tree.root],
            },
            RawTurn {
                author: explainer,
                role: SpeakerRole::Explainer,
                comments: vec![first],
            },
        ];
        walk(tree, first, explainee, explainer, &mut turns);

        if turns.len() < min_turns {
            continue;
        }
        let turns: Vec<Turn> = turns
            .iter()
            .map(|raw| {
                let text = raw
                    .comments
                    .iter()
                    .map(|c| c.body.trim())
                    .collect::<Vec<_>>()
                    .join("\n\n");
                Turn {
                    speaker_role: raw.role,
                    author: raw.author.to_string(),
                    token_count: tokenize(&text).len(),
                    source_comment_id: raw.comments[0].id.clone(),
                    text,
                }
            })
            .collect();
        dialogues.push(Dialogue {
            dialogue_id: format!("{}:{}", tree.thread_id(), first.id),
            topic_question: root_text.clone(),
            turns,
            explainee_author: explainee.to_string(),
            explainer_author: explainer.to_string(),
        });
    }
    Ok(dialogues)
}

/// Follow the best-scoring reply chain below `start`, extending `turns`.
fn walk<'a>(
    tree: &'a ThreadTree,
    start: &'a CommentRecord,
    explainee: &'a str,
    explainer: &'a str,
    turns: &mut Vec<RawTurn<'a>>,
) {
    let mut current = start;
    loop {
        // Best child: highest score, then earliest created_utc, then
        // smallest id. Ids are unique, so the ordering is total.
        let best = tree
            .child_ids(&current.id)
            .iter()
            .filter_map(|id| tree.get(id))
            .max_by(|a, b| {
                a.score
                    .cmp(&b.score)
                    .then(b.created_utc.cmp(&a.created_utc))
                    .then(b.id.cmp(&a.id))
            });
        let next = match best {
            Some(c) => c,
            None => return,
        };
        if is_deleted(&next.author) || (next.author != explainee && next.author != explainer) {
            return; // third party on the path: stop, never skip over
        }
        if usable_text(next).is_none() {
            return;
        }
        let last = turns.last_mut().expect("walk starts with two turns");
        if next.author == last.author {
            last.comments.push(next);
        } else {
            let role = if next.author == explainee {
                SpeakerRole::Explainee
            } else {
                SpeakerRole::Explainer
            };
            turns.push(RawTurn {
                author: if next.author == explainee {
                    explainee
                } else {
                    explainer
                },
                role,
                comments: vec![next],
            });
        }
        current = next;
    }
}
