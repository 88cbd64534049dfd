//! Turn-label taxonomies, multi-annotator judgment storage, EM-based
//! consolidation, and inter-annotator agreement statistics.

mod agreement;
mod consolidate;
mod em;
mod labels;

pub use agreement::{fleiss_kappa, krippendorff_alpha_ordinal};
pub use consolidate::{
    consolidate_corpus, ConsolidateConfig, LabeledCorpus, LabeledDialogue, LabeledTurn,
    QualityMode, Split,
};
pub use em::{aggregate_em, AggregatedLabels, AnnotationSet, AnnotatorModel, EmConfig};
pub use labels::{ActLabel, Dimension, MoveLabel, QualityScore, TopicLabel};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of the annotation input file: a single judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub dimension: Dimension,
    pub annotator_id: String,
    /// Canonical short code, e.g. `"e3"`, `"d9"`, `"t1"`, `"q4"`.
    pub label: String,
}

/// Group raw judgment records into per-dimension [`AnnotationSet`]s.
///
/// A repeated (dimension, item, annotator) triple keeps the last record,
/// treating later lines as corrections.
pub fn group_records(
    records: &[AnnotationRecord],
) -> Result<BTreeMap<Dimension, Vec<AnnotationSet>>> {
    let mut grouped: BTreeMap<Dimension, BTreeMap<String, BTreeMap<String, usize>>> =
        BTreeMap::new();
    for record in records {
        let index = record.dimension.parse_code(&record.label)?;
        grouped
            .entry(record.dimension)
            .or_default()
            .entry(record.item_id.clone())
            .or_default()
            .insert(record.annotator_id.clone(), index);
    }
    Ok(grouped
        .into_iter()
        .map(|(dimension, items)| {
            let sets = items
                .into_iter()
                .map(|(item_id, judgments)| AnnotationSet {
                    item_id,
                    dimension,
                    judgments,
                })
                .collect();
            (dimension, sets)
        })
        .collect())
}
