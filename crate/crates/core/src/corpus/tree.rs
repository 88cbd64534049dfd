//! Comment records and per-thread reply trees.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One raw comment (or question post) from a dump.
///
/// The thread root is the record without a `parent_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub thread_id: String,
    pub author: String,
    pub body: String,
    pub score: i64,
    pub created_utc: i64,
}

/// A reply tree for one thread: the root post plus every record reachable
/// from it. Orphans (records whose parent chain leaves the dump) go to
/// `lost` and are excluded from the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadTree {
    pub root: CommentRecord,
    /// Child ids per comment id, ordered by `(created_utc, id)`.
    pub children: BTreeMap<String, Vec<String>>,
    /// `"YYYY-MM"` derived from the root's `created_utc` (UTC).
    pub month_key: String,
    records: BTreeMap<String, CommentRecord>,
    pub lost: Vec<CommentRecord>,
}

impl ThreadTree {
    pub fn thread_id(&self) -> &str {
        &self.root.thread_id
    }

    pub fn get(&self, id: &str) -> Option<&CommentRecord> {
        self.records.get(id)
    }

    pub fn child_ids(&self, id: &str) -> &[String] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of comments attached to the tree, not counting the root post.
    pub fn comment_count(&self) -> usize {
        self.records.len() - 1
    }

    /// All attached records, root included, ordered by `(created_utc, id)`.
    pub fn sorted_records(&self) -> Vec<&CommentRecord> {
        let mut records: Vec<&CommentRecord> = self.records.values().collect();
        records.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));
        records
    }
}

fn month_key(created_utc: i64) -> String {
    chrono::DateTime::from_timestamp(created_utc, 0)
        .map(|dt| dt.format("%Y-%m").to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Clone, Copy, PartialEq)]
enum Attachment {
    Attached,
    Lost,
}

/// Group a dump into one [`ThreadTree`] per thread.
///
/// Threads without a root record are dropped with a warning; a thread with
/// several parentless records keeps the earliest one (by `created_utc`, then
/// id) as root and treats the rest as lost. Returned trees are ordered by
/// `(root created_utc, thread_id)`.
pub fn parse_dump<I>(raw_records: I) -> Result<Vec<ThreadTree>>
where
    I: IntoIterator<Item = CommentRecord>,
{
    let mut by_thread: BTreeMap<String, Vec<CommentRecord>> = BTreeMap::new();
    for record in raw_records {
        by_thread
            .entry(record.thread_id.clone())
            .or_default()
            .push(record);
    }

    let mut trees = Vec::new();
    for (thread_id, records) in by_thread {
        if let Some(tree) = build_tree(&thread_id, records)? {
            trees.push(tree);
        }
    }
    trees.sort_by(|a, b| {
        (a.root.created_utc, a.thread_id()).cmp(&(b.root.created_utc, b.thread_id()))
    });
    Ok(trees)
}

fn build_tree(thread_id: &str, records: Vec<CommentRecord>) -> Result<Option<ThreadTree>> {
    let mut by_id: HashMap<String, CommentRecord> = HashMap::with_capacity(records.len());
    for record in records {
        if by_id.contains_key(&record.id) {
            return Err(Error::DuplicateId {
                thread_id: thread_id.to_string(),
                id: record.id,
            });
        }
        by_id.insert(record.id.clone(), record);
    }

    let mut roots: Vec<&CommentRecord> = by_id.values().filter(|r| r.parent_id.is_none()).collect();
    roots.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));
    let root = match roots.first() {
        Some(r) => (*r).clone(),
        None => {
            log::warn!(
                "thread {thread_id:?} has no root record; dropping {} records",
                by_id.len()
            );
            return Ok(None);
        }
    };

    // Classify each record by walking its parent chain to the root. A chain
    // that leaves the dump marks the whole subtree as lost; a chain that
    // revisits a node is a cycle.
    let mut status: HashMap<String, Attachment> = HashMap::with_capacity(by_id.len());
    status.insert(root.id.clone(), Attachment::Attached);
    for id in by_id.keys() {
        classify(thread_id, id, &by_id, &mut status)?;
    }

    let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut attached: BTreeMap<String, CommentRecord> = BTreeMap::new();
    let mut lost: Vec<CommentRecord> = Vec::new();
    attached.insert(root.id.clone(), root.clone());
    for (id, record) in &by_id {
        if *id == root.id {
            continue;
        }
        match status[id] {
            Attachment::Attached => {
                attached.insert(id.clone(), record.clone());
                children
                    .entry(record.parent_id.clone().expect("non-root has a parent"))
                    .or_default()
                    .push(id.clone());
            }
            Attachment::Lost => lost.push(record.clone()),
        }
    }
    for child_ids in children.values_mut() {
        child_ids.sort_by(|a, b| (by_id[a].created_utc, a).cmp(&(by_id[b].created_utc, b)));
    }
    lost.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));

    Ok(Some(ThreadTree {
        month_key: month_key(root.created_utc),
        root,
        children,
        records: attached,
        lost,
    }))
}

fn classify(
    thread_id: &str,
    start: &str,
    by_id: &HashMap<String, CommentRecord>,
    status: &mut HashMap<String, Attachment>,
) -> Result<Attachment> {
    let mut path: Vec<String> = Vec::new();
    let mut cur = start.to_string();
    let outcome = loop {
        if let Some(&known) = status.get(&cur) {
            break known;
        }
        if let Some(pos) = path.iter().position(|p| *p == cur) {
            let mut cycle: Vec<String> = path[pos..].to_vec();
            cycle.push(cur.clone());
            return Err(Error::CycleDetected {
                thread_id: thread_id.to_string(),
                cycle,
            });
        }
        path.push(cur.clone());
        match by_id[&cur].parent_id.as_ref().and_then(|p| by_id.get(p)) {
            Some(parent) => cur = parent.id.clone(),
            None => {
                // Parent id missing from the dump (orphan), or a second
                // parentless record that lost the root election.
                break Attachment::Lost;
            }
        }
    };
    for id in path {
        status.insert(id, outcome);
    }
    Ok(outcome)
}

/// Keep, per month, the `per_month_limit` threads with the most comments.
///
/// Ties go to the earlier root `created_utc`, then the lexicographically
/// smaller root id. Months with fewer threads return all of them.
pub fn select_candidate_threads(
    trees: Vec<ThreadTree>,
    per_month_limit: usize,
) -> Result<Vec<ThreadTree>> {
    if per_month_limit < 1 {
        return Err(Error::InvalidParameter {
            name: "per_month_limit",
            reason: "must be at least 1".to_string(),
        });
    }
    let mut by_month: BTreeMap<String, Vec<ThreadTree>> = BTreeMap::new();
    for tree in trees {
        by_month
            .entry(tree.month_key.clone())
            .or_default()
            .push(tree);
    }
    let mut selected = Vec::new();
    for (_, mut month_trees) in by_month {
        month_trees.sort_by(|a, b| {
            b.comment_count()
                .cmp(&a.comment_count())
                .then(a.root.created_utc.cmp(&b.root.created_utc))
                .then(a.root.id.cmp(&b.root.id))
        });
        month_trees.truncate(per_month_limit);
        selected.extend(month_trees);
    }
    Ok(selected)
}
