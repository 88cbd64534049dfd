//! Corpus construction: parse comment-tree dumps, pick candidate threads,
//! and extract alternating explainee/explainer dialogues.

mod extract;
mod tokenize;
mod tree;

pub use extract::{extract_dialogues, Dialogue, SpeakerRole, Turn};
pub use tokenize::{tokenize, tokenize_lower};
pub use tree::{parse_dump, select_candidate_threads, CommentRecord, ThreadTree};
