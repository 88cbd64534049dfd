//! Corpus statistics: label distributions, quality-conditioned
//! distributions, flow-pattern mining, and the quality-score distribution.
//!
//! All percentages are computed over exact counts and rounded for output:
//! one decimal for plain distributions, whole percents for the per-quality
//! breakdowns. Rounding slop means a quality breakdown row sums to 100 give
//! or take a couple of points; tests check this on realistic data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{Dimension, LabeledCorpus, LabeledDialogue, Split};
use crate::error::{Error, Result};

/// Which dialogues an aggregation runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Train,
    Test,
    All,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Train => "train",
            Scope::Test => "test",
            Scope::All => "all",
        }
    }

    fn contains(self, dialogue: &LabeledDialogue) -> bool {
        match self {
            Scope::Train => dialogue.split == Split::Train,
            Scope::Test => dialogue.split == Split::Test,
            Scope::All => true,
        }
    }
}

/// Short label names used when rendering flow sequences.
///
/// This is the single rendering table; report strings are built from it and
/// nothing else, so golden files stay stable.
pub fn flow_name(dimension: Dimension, index: usize) -> &'static str {
    const MOVES: [&str; 10] = [
        "Test",
        "Prior",
        "Explain",
        "Req.",
        "Under.",
        "Non-Under.",
        "Feedback",
        "Assess",
        "Extra",
        "Other",
    ];
    const ACTS: [&str; 10] = [
        "Check",
        "What/How",
        "Ask",
        "Confirm",
        "Disconfirm",
        "Answer",
        "Agree",
        "Disagree",
        "Inform",
        "Other",
    ];
    const TOPICS: [&str; 4] = ["Main", "Suptopic", "Related", "Other"];
    match dimension {
        Dimension::Move => MOVES[index],
        Dimension::Act => ACTS[index],
        Dimension::Topic => TOPICS[index],
        Dimension::Quality => panic!("quality has no flow rendering"),
    }
}

fn require_turn_dimension(dimension: Dimension) -> Result<()> {
    if dimension == Dimension::Quality {
        return Err(Error::InvalidParameter {
            name: "dimension",
            reason: "flow statistics are over turn dimensions (move/act/topic)".to_string(),
        });
    }
    Ok(())
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn round0(x: f64) -> f64 {
    x.round()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCount {
    pub code: String,
    pub count: usize,
    /// Percent of in-scope turns, rounded to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub dimension: Dimension,
    pub scope: Scope,
    /// One entry per label, in canonical label order.
    pub entries: Vec<LabelCount>,
}

/// Exact counts and percents per label over the turns in scope.
pub fn label_distribution(
    corpus: &LabeledCorpus,
    dimension: Dimension,
    scope: Scope,
) -> Result<LabelDistribution> {
    require_turn_dimension(dimension)?;
    let mut counts = vec![0usize; dimension.label_count()];
    let mut total = 0usize;
    for dialogue in corpus.dialogues.iter().filter(|d| scope.contains(d)) {
        for turn in &dialogue.turns {
            counts[turn.label_index(dimension)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput(format!(
            "no turns in scope {}",
            scope.as_str()
        )));
    }
    let entries = counts
        .iter()
        .enumerate()
        .map(|(index, &count)| LabelCount {
            code: dimension.code_of(index),
            count,
            percent: round1(100.0 * count as f64 / total as f64),
        })
        .collect();
    Ok(LabelDistribution {
        dimension,
        scope,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConditionedEntry {
    pub code: String,
    /// Turns bearing this label, over the whole corpus.
    pub frequency: usize,
    /// Of those turns, the whole-percent share in dialogues of each quality
    /// score 1..=5.
    pub score_percents: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConditionedDistribution {
    pub dimension: Dimension,
    /// Ordered by frequency, most frequent first.
    pub entries: Vec<QualityConditionedEntry>,
}

/// For each label, how its turns spread over the dialogue quality scores.
pub fn quality_conditioned_distribution(
    corpus: &LabeledCorpus,
    dimension: Dimension,
) -> Result<QualityConditionedDistribution> {
    require_turn_dimension(dimension)?;
    let label_count = dimension.label_count();
    let mut per_score = vec![[0usize; 5]; label_count];
    for dialogue in &corpus.dialogues {
        let score = dialogue.quality.index();
        for turn in &dialogue.turns {
            per_score[turn.label_index(dimension)][score] += 1;
        }
    }
    let mut entries: Vec<QualityConditionedEntry> = per_score
        .iter()
        .enumerate()
        .map(|(index, scores)| {
            let frequency: usize = scores.iter().sum();
            let mut score_percents = [0.0; 5];
            if frequency > 0 {
                for (p, &c) in score_percents.iter_mut().zip(scores) {
                    *p = round0(100.0 * c as f64 / frequency as f64);
                }
            }
            QualityConditionedEntry {
                code: dimension.code_of(index),
                frequency,
                score_percents,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.code.cmp(&b.code)));
    Ok(QualityConditionedDistribution { dimension, entries })
}

/// A full per-dialogue label sequence with its frequency and per-quality
/// breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPattern {
    pub dimension: Dimension,
    /// Canonical short names, one per turn; repeats are not collapsed.
    pub sequence: Vec<String>,
    pub frequency: usize,
    pub score_percents: [f64; 5],
}

impl FlowPattern {
    /// The sequence as it appears in reports, e.g. `"Ask, Inform, Ask"`.
    pub fn rendered(&self) -> String {
        self.sequence.join(", ")
    }
}

/// Group dialogues by their full label sequence and return the `top_k` most
/// frequent flows (ties toward the lexicographically smaller sequence).
pub fn mine_flows(
    corpus: &LabeledCorpus,
    dimension: Dimension,
    top_k: usize,
) -> Result<Vec<FlowPattern>> {
    require_turn_dimension(dimension)?;
    if top_k < 1 {
        return Err(Error::InvalidParameter {
            name: "top_k",
            reason: "must be at least 1".to_string(),
        });
    }
    let mut groups: BTreeMap<Vec<usize>, (usize, [usize; 5])> = BTreeMap::new();
    for dialogue in &corpus.dialogues {
        let sequence: Vec<usize> = dialogue
            .turns
            .iter()
            .map(|t| t.label_index(dimension))
            .collect();
        let entry = groups.entry(sequence).or_insert((0, [0; 5]));
        entry.0 += 1;
        entry.1[dialogue.quality.index()] += 1;
    }
    let mut flows: Vec<FlowPattern> = groups
        .into_iter()
        .map(|(indices, (frequency, scores))| {
            let mut score_percents = [0.0; 5];
            for (p, &c) in score_percents.iter_mut().zip(&scores) {
                *p = round0(100.0 * c as f64 / frequency as f64);
            }
            FlowPattern {
                dimension,
                sequence: indices
                    .iter()
                    .map(|&i| flow_name(dimension, i).to_string())
                    .collect(),
                frequency,
                score_percents,
            }
        })
        .collect();
    flows.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then(a.sequence.cmp(&b.sequence))
    });
    flows.truncate(top_k);
    Ok(flows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    /// Dialogue counts per quality score 1..=5.
    pub counts: [usize; 5],
    /// Percents over all dialogues, rounded to one decimal.
    pub percents: [f64; 5],
}

pub fn score_distribution(corpus: &LabeledCorpus) -> Result<ScoreDistribution> {
    if corpus.dialogues.is_empty() {
        return Err(Error::EmptyInput("no dialogues".into()));
    }
    let mut counts = [0usize; 5];
    for dialogue in &corpus.dialogues {
        counts[dialogue.quality.index()] += 1;
    }
    let total = corpus.dialogues.len() as f64;
    let mut percents = [0.0; 5];
    for (p, &c) in percents.iter_mut().zip(&counts) {
        *p = round1(100.0 * c as f64 / total);
    }
    Ok(ScoreDistribution { counts, percents })
}

// --- CSV rendering ---------------------------------------------------------

fn write_csv<W: std::io::Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn distribution_csv<W: std::io::Write>(dist: &LabelDistribution, out: W) -> Result<()> {
    write_csv(
        out,
        &["label", "count", "percent"],
        dist.entries.iter().map(|e| {
            vec![
                e.code.clone(),
                e.count.to_string(),
                format!("{:.1}", e.percent),
            ]
        }),
    )
}

pub fn quality_conditioned_csv<W: std::io::Write>(
    dist: &QualityConditionedDistribution,
    out: W,
) -> Result<()> {
    write_csv(
        out,
        &["label", "frequency", "s1", "s2", "s3", "s4", "s5"],
        dist.entries.iter().map(|e| {
            let mut row = vec![e.code.clone(), e.frequency.to_string()];
            row.extend(e.score_percents.iter().map(|p| format!("{p:.0}")));
            row
        }),
    )
}

pub fn flows_csv<W: std::io::Write>(flows: &[FlowPattern], out: W) -> Result<()> {
    write_csv(
        out,
        &["sequence", "frequency", "s1", "s2", "s3", "s4", "s5"],
        flows.iter().map(|f| {
            let mut row = vec![f.rendered(), f.frequency.to_string()];
            row.extend(f.score_percents.iter().map(|p| format!("{p:.0}")));
            row
        }),
    )
}

pub fn scores_csv<W: std::io::Write>(dist: &ScoreDistribution, out: W) -> Result<()> {
    write_csv(
        out,
        &["score", "count", "percent"],
        (0..5).map(|s| {
            vec![
                (s + 1).to_string(),
                dist.counts[s].to_string(),
                format!("{:.1}", dist.percents[s]),
            ]
        }),
    )
}
